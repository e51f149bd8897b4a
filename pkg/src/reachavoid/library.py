"""Ready-made models used by the tests, demos and documentation."""

from __future__ import annotations

import numpy as np

from .model import ReachAvoidModel, all_policies_terminate

__all__ = ["gambler_ruin", "red_and_black", "random_model", "loiter_or_jump", "exit_or_advance"]


def gambler_ruin(n: int = 10, p: float = 0.5) -> ReachAvoidModel:
    """Uncontrolled walk on ``{0..n}``: up with probability ``p``.

    Target ``{n}``, cemetery ``{0}``, a single action ``"step"``.
    """
    m = n + 1
    kernel = np.zeros((m, 1, m))
    for i in range(1, n):
        kernel[i, 0, i + 1] = p
        kernel[i, 0, i - 1] = 1.0 - p
    target = np.zeros(m, dtype=bool)
    target[n] = True
    safe = np.ones(m, dtype=bool)
    safe[0] = False
    return ReachAvoidModel(
        kernel, target, safe, states=[str(i) for i in range(m)], actions=["step"],
        coordinates=np.arange(m, dtype=float),
    )


def red_and_black(n: int = 10, p: float = 0.4) -> ReachAvoidModel:
    """Controlled gambler's ruin: at fortune ``i`` stake any ``s <= min(i, n-i)``.

    The stake is won with probability ``p``.  Action ``"s"`` means stake ``s``;
    stakes larger than allowed are infeasible.  For ``p < 1/2`` bold play
    (stake everything that is useful) is optimal.
    """
    m = n + 1
    k = n // 2
    kernel = np.zeros((m, k, m))
    feasible = np.zeros((m, k), dtype=bool)
    for i in range(1, n):
        for s in range(1, min(i, n - i) + 1):
            feasible[i, s - 1] = True
            kernel[i, s - 1, i + s] += p
            kernel[i, s - 1, i - s] += 1.0 - p
    target = np.zeros(m, dtype=bool)
    target[n] = True
    safe = np.ones(m, dtype=bool)
    safe[0] = False
    return ReachAvoidModel(
        kernel, target, safe, feasible=feasible,
        states=[str(i) for i in range(m)], actions=[str(s) for s in range(1, k + 1)],
        coordinates=np.arange(m, dtype=float),
    )


def loiter_or_jump(stay: float = 0.9) -> ReachAvoidModel:
    """Four-state model where loitering and jumping to the target compete.

    States ``goal`` (target), ``dead`` (cemetery), ``d1``, ``d2``.  Action
    ``jump`` reaches ``goal`` with probability 0.9 and ``dead`` otherwise;
    ``loiter`` moves to the other decision state with probability ``stay``
    and to ``dead`` otherwise.
    """
    S = ["goal", "dead", "d1", "d2"]
    kernel = np.zeros((4, 2, 4))
    for x, other in ((2, 3), (3, 2)):
        kernel[x, 0] = [0.9, 0.1, 0.0, 0.0]
        kernel[x, 1, other] = stay
        kernel[x, 1, 1] = 1.0 - stay
    return ReachAvoidModel(
        kernel, target=[True, False, False, False], safe=[True, False, True, True],
        states=S, actions=["jump", "loiter"],
    )


def exit_or_advance(success: float = 0.95) -> ReachAvoidModel:
    """Four-state chain ``d1 -> d2 -> goal`` with an exit to ``dead`` everywhere.

    ``advance`` moves one step forward (from ``d2`` it reaches ``goal`` with
    probability ``success``); ``quit`` jumps straight to ``dead``.
    """
    S = ["goal", "dead", "d1", "d2"]
    kernel = np.zeros((4, 2, 4))
    kernel[2, 0, 1] = 1.0
    kernel[2, 1, 3] = 1.0
    kernel[3, 0, 1] = 1.0
    kernel[3, 1] = [success, 1.0 - success, 0.0, 0.0]
    return ReachAvoidModel(
        kernel, target=[True, False, False, False], safe=[True, False, True, True],
        states=S, actions=["quit", "advance"],
    )


def random_model(
    rng: np.random.Generator,
    n_states: int | tuple[int, int] = (3, 20),
    n_actions: int | tuple[int, int] = (1, 4),
    density: float = 0.4,
    escape: bool = True,
    max_tries: int = 1000,
) -> ReachAvoidModel:
    """Draw a random valid model.

    Each state is target, cemetery or decision; every decision state has at
    least one feasible action and rows are random sparse distributions.
    With ``escape=True`` draws are repeated until every stationary policy
    stops almost surely.

    ``n_states`` and ``n_actions`` may be ints or inclusive ``(lo, hi)`` ranges.
    """

    def pick(spec):
        if isinstance(spec, tuple):
            return int(rng.integers(spec[0], spec[1] + 1))
        return int(spec)

    for _ in range(max_tries):
        m = max(pick(n_states), 3)
        k = pick(n_actions)
        cls = rng.integers(0, 3, size=m)
        cls[:3] = [0, 1, 2]  # at least one state of each class
        rng.shuffle(cls)
        target, safe = cls == 0, cls != 1
        feasible = rng.random((m, k)) < 0.8
        feasible[np.arange(m), rng.integers(0, k, size=m)] = True
        support = rng.random((m, k, m)) < density
        support[np.arange(m)[:, None], np.arange(k)[None, :], rng.integers(0, m, size=(m, k))] = True
        weights = rng.exponential(size=(m, k, m)) * support
        kernel = weights / weights.sum(axis=2, keepdims=True)
        model = ReachAvoidModel(kernel, target, safe, feasible=feasible)
        if not escape or all_policies_terminate(model):
            return model
    raise RuntimeError("could not draw a terminating model; lower density or raise max_tries")
