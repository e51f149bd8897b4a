"""Scalar linear-Gaussian system x' = x + a + w on a grid.

The target is ]-1, 1[, the safe set [-3, 3], actions lie in [-1, 1] and the
noise is standard normal.  For a single step the best action is -sat(x);
the grid model should agree, and its multi-step policy stays bang-bang
outside the target.
"""

import numpy as np

from reachavoid.bellman import apply_T, extract_policy, indicator_target, value_iteration
from reachavoid.discretize import Linear1DSystem, build_grid_model, grid_value_error, greedy_oracle
from reachavoid.plotting import plot_result

for step in (0.1, 0.05, 0.025):
    sys_ = Linear1DSystem(grid_step=step)
    model = build_grid_model(sys_)
    v1 = apply_T(model, indicator_target(model))
    err = grid_value_error(sys_, v1)
    print(f"grid step {step}: {model.n_states} states, one-step sup error {err['sup']:.4f}")

sys_ = Linear1DSystem()
model = build_grid_model(sys_)
acts = np.array([float(a) for a in model.actions])
one_step = acts[extract_policy(model, indicator_target(model))]
policy, value = greedy_oracle(sys_)
d = model.decision
print("one-step policy equals -sat(center):", np.allclose(one_step[d], policy(model.coordinates[d])))

res = value_iteration(model)
multi = acts[res.policy]
x = model.coordinates
print(f"multi-step solve: {res.iterations} sweeps")
for c in (-2.975, -1.525, 1.025, 2.475):
    j = int(np.argmin(np.abs(x - c)))
    print(f"  x={x[j]:+.3f}: action {multi[j]:+.2f}, V*={res.value[j]:.4f}, one-step value {value(x[j]):.4f}")

doc = {
    "value": {s: float(v) for s, v in zip(model.states, res.value)},
    "policy": {model.states[i]: model.actions[a] for i, a in enumerate(res.policy) if a >= 0},
    "coordinates": {s: float(c) for s, c in zip(model.states, x)},
}
plot_result(doc, "linear_gaussian.svg", title="grid V* and policy")
print("wrote linear_gaussian.svg")
