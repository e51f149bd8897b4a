"""Reward reformulations of the reach-avoid objective.

Several per-stage rewards lead to the same optimal policy as the hitting
probability.  Adding a constant to the reward is not one of them: once the
decision states pay a positive reward, staying alive becomes the goal.
"""

import numpy as np

from reachavoid import evaluate_policy, make_variant, reward_value_iteration, value_iteration
from reachavoid.library import exit_or_advance, gambler_ruin, loiter_or_jump
from reachavoid.linear import expected_exit_time, induce_chain

ruin = gambler_ruin(10)
hit = value_iteration(ruin).value
v3 = reward_value_iteration(ruin, make_variant("V3", ruin)).value
v4 = reward_value_iteration(ruin, make_variant("V4", ruin)).value
print("V3 - (2V - 1), max:", np.abs(v3 - (2 * hit - 1)).max())
print("V4 on ruin (expected duration):", np.round(v4, 6))

model = loiter_or_jump(0.9)
base = make_variant("V3", model)
for name, spec in (("r'", base), ("r' + 1", base.shifted(1.0))):
    res = reward_value_iteration(model, spec)
    pol = [model.actions[a] for a in res.policy[2:]]
    T = expected_exit_time(induce_chain(model, res.policy))
    P = evaluate_policy(model, res.policy)
    print(f"{name:>7}: policy {pol}, P(hit) {P[2]:.3f}, E[exit time] {T[2]:.2f}")

chain = exit_or_advance(0.95)
for gamma in (1.0, 3.0):
    res = reward_value_iteration(chain, make_variant("V5", chain, gamma=gamma))
    print(f"V5 gamma={gamma}: policy {[chain.actions[a] for a in res.policy[2:]]}")
