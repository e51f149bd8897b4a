"""Martingale diagnostics for good, bad and subtly bad policies.

Red-and-black with win probability 0.4: bold play is optimal, timid play
(always stake one) is not.  A third model shows a policy that never loses
value in one step yet never finishes: it is thrifty but not equalizing.
"""

import numpy as np

from reachavoid import ReachAvoidModel, martingale_diagnostics, value_iteration
from reachavoid.library import red_and_black


def show(name, rep):
    v = rep.verdicts
    print(f"{name:>8}: hit {rep.hit['estimate']:.4f}, Λ {rep.lambda_estimate['estimate']:.4f}, "
          + ", ".join(f"{k}={'ok' if ok else 'FAIL'}" for k, ok in v.items()))


model = red_and_black(10, 0.4)
res = value_iteration(model)
print(f"V*(3) = {res.value[3]:.4f}")
show("optimal", martingale_diagnostics(model, res.policy, res.value, "3", 100_000, seed=5))
timid = np.where(model.decision, 0, -1)
show("timid", martingale_diagnostics(model, timid, res.value, "3", 100_000, seed=5))

# "stay" ties with "go" under V* and wins on index, so the greedy policy loops forever
kernel = np.zeros((4, 2, 4))
kernel[2, 0, 3] = kernel[3, 0, 2] = 1.0
kernel[2:, 1, 0] = 1.0
loop = ReachAvoidModel(kernel, [True, False, False, False], [True, False, True, True],
                       states=["goal", "dead", "d1", "d2"], actions=["stay", "go"])
lres = value_iteration(loop)
show("looping", martingale_diagnostics(loop, lres.policy, lres.value, "d1", 1000, horizon_cap=100))
