"""Exact hitting probabilities of uncontrolled (policy-induced) chains.

Fixing a stationary policy turns the controlled model into an ordinary
Markov chain.  Its probability of reaching ``O`` before ``X \\ K`` solves the
linear system ``(I - Q_DD) v = Q(O | x)`` on the decision states ``D``.
"""

from __future__ import annotations

import dataclasses
import warnings

import numpy as np
from scipy import linalg

from .model import ROW_TOLERANCE, ReachAvoidModel, StateClass

__all__ = [
    "InducedChain",
    "SingularChainError",
    "induce_chain",
    "chain_from_matrix",
    "solve_hitting",
    "solve_absorption",
    "expected_exit_time",
    "CONDITION_LIMIT",
]

#: Systems with a one-norm condition estimate above this are refused.
CONDITION_LIMIT = 1e12


class SingularChainError(np.linalg.LinAlgError):
    """``I - Q_DD`` is (numerically) singular: a closed class sits inside ``K \\ O``."""


@dataclasses.dataclass(frozen=True, eq=False)
class InducedChain:
    """Stochastic matrix plus the state partition.

    Target and cemetery rows are absorbing self-loops so the matrix can be
    used directly for simulation.
    """

    kernel: np.ndarray
    classes: np.ndarray

    @property
    def decision(self) -> np.ndarray:
        return self.classes == StateClass.DECISION

    @property
    def target(self) -> np.ndarray:
        return self.classes == StateClass.TARGET

    @property
    def cemetery(self) -> np.ndarray:
        return self.classes == StateClass.CEMETERY


def _check_policy(model: ReachAvoidModel, policy) -> np.ndarray:
    policy = np.asarray(policy, dtype=np.int64)
    if policy.shape != (model.n_states,):
        raise ValueError(f"policy must have shape ({model.n_states},), got {policy.shape}")
    d = np.flatnonzero(model.decision)
    acts = policy[d]
    if np.any(acts < 0) or np.any(acts >= model.n_actions):
        raise ValueError("policy must choose an action at every decision state")
    if not model.feasible[d, acts].all():
        bad = d[~model.feasible[d, acts]]
        raise ValueError(f"infeasible action at states {[model.states[i] for i in bad]}")
    return policy


def induce_chain(model: ReachAvoidModel, policy) -> InducedChain:
    """Chain obtained by applying ``policy`` (action index per state) on ``K \\ O``."""
    policy = _check_policy(model, policy)
    m = model.n_states
    P = np.zeros((m, m))
    d = np.flatnonzero(model.decision)
    P[d] = model.kernel[d, policy[d]]
    rest = np.flatnonzero(~model.decision)
    P[rest, rest] = 1.0
    P.setflags(write=False)
    return InducedChain(P, model.classes)


def chain_from_matrix(P, target, safe) -> InducedChain:
    """Wrap a plain transition matrix; boundary rows are replaced by self-loops."""
    P = np.array(P, dtype=float, copy=True)
    target = np.asarray(target, dtype=bool)
    safe = np.asarray(safe, dtype=bool)
    classes = np.full(P.shape[0], StateClass.DECISION, dtype=np.int8)
    classes[target] = StateClass.TARGET
    classes[~safe] = StateClass.CEMETERY
    rest = np.flatnonzero(classes != StateClass.DECISION)
    P[rest] = 0.0
    P[rest, rest] = 1.0
    if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > ROW_TOLERANCE):
        raise ValueError("rows must be probability distributions")
    P.setflags(write=False)
    return InducedChain(P, classes)


def _factor(chain: InducedChain):
    d = np.flatnonzero(chain.decision)
    A = np.eye(d.size) - chain.kernel[np.ix_(d, d)]
    with warnings.catch_warnings():
        # exact singularity is reported through the condition estimate below
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        lu, piv = linalg.lu_factor(A, check_finite=False)
    gecon = linalg.get_lapack_funcs("gecon", (lu,))
    rcond, info = gecon(lu, np.linalg.norm(A, 1), norm="1")
    if info != 0 or not rcond > 1.0 / CONDITION_LIMIT:
        raise SingularChainError(
            f"closed class inside K\\O: condition estimate {1.0 / rcond if rcond else np.inf:.3g}"
        )
    return d, lu, piv


def solve_absorption(chain: InducedChain, goal) -> np.ndarray:
    """Probability of entering the boundary states in ``goal`` first.

    ``goal`` is a boolean mask over states; only its non-decision part
    matters.  Returns a full vector with ``1`` on goal boundary states and
    ``0`` on the other boundary states.
    """
    goal = np.asarray(goal, dtype=bool) & ~chain.decision
    v = goal.astype(float)
    if chain.decision.any():
        d, lu, piv = _factor(chain)
        b = chain.kernel[d][:, goal].sum(axis=1)
        v[d] = linalg.lu_solve((lu, piv), b, check_finite=False)
    return v


def solve_hitting(chain: InducedChain, reach: str = "target") -> np.ndarray:
    """Probability of hitting ``O`` before ``X \\ K`` (or the reverse).

    Parameters
    ----------
    chain : InducedChain
    reach : {"target", "cemetery"}
        Which boundary set plays the role of the goal.

    Raises
    ------
    SingularChainError
        When the decision block has a closed class (``τ ∧ τ'`` may be
        infinite) or is too ill-conditioned to trust.
    """
    if reach == "target":
        goal = chain.target
    elif reach == "cemetery":
        goal = chain.cemetery
    else:
        raise ValueError(f"reach must be 'target' or 'cemetery', not {reach!r}")
    v = solve_absorption(chain, goal)
    d = chain.decision
    if np.any(v[d] < -1e-9) or np.any(v[d] > 1 + 1e-9):
        raise SingularChainError("solution left [0, 1]; system is numerically unreliable")
    v[d] = np.clip(v[d], 0.0, 1.0)
    return v


def expected_exit_time(chain: InducedChain) -> np.ndarray:
    """``E[τ ∧ τ']`` for every start state (zero on the boundary)."""
    t = np.zeros(chain.kernel.shape[0])
    if chain.decision.any():
        d, lu, piv = _factor(chain)
        t[d] = linalg.lu_solve((lu, piv), np.ones(d.size), check_finite=False)
    return t
