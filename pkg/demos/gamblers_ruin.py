"""Gambler's ruin: solve, check against the ruin formula, then simulate.

A walk on {0..10} moves up with probability p.  Reaching 10 is success,
reaching 0 is ruin.  With a single action there is nothing to optimize, so
value iteration must reproduce the classical hitting probabilities.
"""

import numpy as np

from reachavoid import sample_trajectories, value_iteration
from reachavoid.library import gambler_ruin

for p in (0.5, 0.4):
    model = gambler_ruin(10, p)
    res = value_iteration(model)
    r = (1 - p) / p
    i = np.arange(11)
    exact = i / 10 if p == 0.5 else (r**i - 1) / (r**10 - 1)
    print(f"p={p}: {res.iterations} sweeps, max error vs formula {np.abs(res.value - exact).max():.1e}")

# Monte Carlo from the middle of the fair walk
model = gambler_ruin(10, 0.5)
res = value_iteration(model)
sim = sample_trajectories(model, res.policy, "5", n_traj=100_000, seed=1)
lo, hi = sim.ci
print(f"fair walk from 5: estimate {sim.estimate:.4f}, 95% CI [{lo:.4f}, {hi:.4f}]")
print(f"mean duration {sim.trajectories.lengths.mean():.2f} steps (exact 25)")
