"""Dynamic programming for the maximal probability of reaching ``O`` before leaving ``K``.

The dynamic programming operator is

    (Tu)(x) = 1_O(x) + 1_{K\\O}(x) max_{a in A(x)} sum_{y in K} Q(y|x,a) u(y)

and value iteration from ``v_0 = 1_O`` increases monotonically to the optimal
value ``V*``.  Any selector attaining the maximum in ``T V*`` gives an
optimal deterministic stationary policy when every policy stops a.s.

Values are plain float arrays indexed by state.  Policies are int arrays of
action indices, ``-1`` off the decision states.
"""

from __future__ import annotations

import dataclasses
import warnings
from typing import Iterator

import numpy as np

from . import linear
from .model import ReachAvoidModel, require_valid

__all__ = [
    "SolveResult",
    "BoundaryFormError",
    "NO_ACTION",
    "indicator_target",
    "with_boundary",
    "check_boundary_form",
    "action_values",
    "apply_T",
    "value_iterates",
    "value_iteration",
    "maximizers",
    "extract_policy",
    "count_ties",
    "bellman_residual",
    "evaluate_policy",
    "evaluate_policy_iterative",
    "value_to_dict",
    "value_from_dict",
    "policy_to_dict",
    "policy_from_dict",
]

NO_ACTION = -1
DEFAULT_TOLERANCE = 1e-12
DEFAULT_MAX_ITER = 1_000_000
TIE_TOLERANCE = 1e-12


class BoundaryFormError(ValueError):
    """Value is not 1 on the target, 0 on the cemetery, and within [0, 1]."""


def indicator_target(model: ReachAvoidModel) -> np.ndarray:
    return model.target.astype(float)


def with_boundary(model: ReachAvoidModel, u) -> np.ndarray:
    """Copy of ``u`` clamped to [0, 1] with 1 on ``O`` and 0 off ``K``."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    u[model.target] = 1.0
    u[model.cemetery] = 0.0
    return u


def check_boundary_form(model: ReachAvoidModel, v, atol: float = 0.0) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (model.n_states,):
        raise BoundaryFormError(f"value must have shape ({model.n_states},), got {v.shape}")
    if np.any(np.abs(v[model.target] - 1.0) > atol):
        raise BoundaryFormError("value must equal 1 on the target set")
    if np.any(np.abs(v[model.cemetery]) > atol):
        raise BoundaryFormError("value must equal 0 off the safe set")
    if np.any(v < -atol) or np.any(v > 1.0 + atol) or not np.all(np.isfinite(v)):
        raise BoundaryFormError("value must lie in [0, 1]")
    return v


def action_values(model: ReachAvoidModel, u) -> np.ndarray:
    """``S(x, a) = sum_{y in K} Q(y|x,a) u(y)``; ``-inf`` for infeasible pairs."""
    q = model.kernel @ (np.asarray(u, dtype=float) * model.safe)
    return np.where(model.feasible, q, -np.inf)


def apply_T(model: ReachAvoidModel, u) -> np.ndarray:
    """One Jacobi sweep of the dynamic programming operator."""
    q = action_values(model, u)
    out = indicator_target(model)
    d = model.decision
    out[d] = q[d].max(axis=1)
    return with_boundary(model, out)


def value_iterates(model: ReachAvoidModel, v0=None) -> Iterator[np.ndarray]:
    """Yield ``v_0, v_1, ...`` forever (``v_0 = 1_O`` unless ``v0`` given)."""
    v = indicator_target(model) if v0 is None else with_boundary(model, v0)
    while True:
        yield v
        v = apply_T(model, v)


def bellman_residual(model: ReachAvoidModel, value) -> float:
    """Sup-norm of ``value - T value``."""
    value = np.asarray(value, dtype=float)
    return float(np.max(np.abs(value - apply_T(model, value))))


def maximizers(model: ReachAvoidModel, value, tie_tol: float = TIE_TOLERANCE) -> np.ndarray:
    """Mask of feasible actions within ``tie_tol`` of the best backup at each decision state."""
    q = action_values(model, value)
    best = q.max(axis=1, keepdims=True)
    mask = model.feasible & (q >= best - tie_tol)
    mask[~model.decision] = False
    return mask


def extract_policy(model: ReachAvoidModel, value, tie_tol: float = TIE_TOLERANCE) -> np.ndarray:
    """Greedy selector for ``value``; ties go to the lowest action index.

    Raises
    ------
    ValueError
        If a decision state has no feasible action.
    """
    mask = maximizers(model, value, tie_tol)
    d = model.decision
    if not mask[d].any(axis=1).all():
        raise ValueError("decision state without feasible actions")
    policy = np.full(model.n_states, NO_ACTION, dtype=np.int64)
    policy[d] = np.argmax(mask[d], axis=1)
    return policy


def count_ties(model: ReachAvoidModel, value, tie_tol: float = TIE_TOLERANCE) -> int:
    """Number of decision states with more than one maximizing action."""
    return int((maximizers(model, value, tie_tol).sum(axis=1) > 1).sum())


@dataclasses.dataclass
class SolveResult:
    value: np.ndarray
    policy: np.ndarray
    iterations: int
    residual: float
    converged: bool
    tolerance: float
    ties: int = 0

    def to_dict(self, model: ReachAvoidModel) -> dict:
        return {
            "value": value_to_dict(model, self.value),
            "policy": policy_to_dict(model, self.policy),
            "iterations": int(self.iterations),
            "residual": float(self.residual),
            "converged": bool(self.converged),
            "tolerance": float(self.tolerance),
            "ties": int(self.ties),
        }


def value_iteration(
    model: ReachAvoidModel,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iter: int = DEFAULT_MAX_ITER,
    v0=None,
) -> SolveResult:
    """Iterate ``v_{n+1} = T v_n`` until ``|v_{n+1} - v_n|_inf <= tolerance``.

    Parameters
    ----------
    model : ReachAvoidModel
    tolerance : float
        Stop once a sweep moves no value by more than this.
    max_iter : int
        Sweep budget.  Running out is not an error: the result has
        ``converged=False``.
    v0 : array_like, optional
        Warm start, clamped to boundary form.  Warm starts above ``V*`` may
        converge to a larger fixed point on models where some policy never
        stops; the default ``1_O`` always yields ``V*``.

    Returns
    -------
    SolveResult
        ``value`` is the last iterate ``v`` whose residual ``|Tv - v|`` is
        reported; ``policy`` is greedy with respect to it.
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    require_valid(model)
    v = indicator_target(model) if v0 is None else with_boundary(model, v0)
    converged = False
    residual = None
    n = 0
    for n in range(max_iter):
        w = apply_T(model, v)
        residual = float(np.max(np.abs(w - v)))
        if residual <= tolerance:
            converged = True
            break
        v = w
    else:
        n = max_iter
        residual = bellman_residual(model, v)
    return SolveResult(
        value=v,
        policy=extract_policy(model, v),
        iterations=n,
        residual=residual,
        converged=converged,
        tolerance=tolerance,
        ties=count_ties(model, v),
    )


def evaluate_policy_iterative(
    model: ReachAvoidModel, policy, tolerance: float = DEFAULT_TOLERANCE, max_iter: int = DEFAULT_MAX_ITER
) -> np.ndarray:
    """``V(f^inf, .)`` as the monotone limit of the policy's own iterates from ``1_O``."""
    chain = linear.induce_chain(model, policy)
    P = chain.kernel * model.safe[None, :]
    d = model.decision
    v = indicator_target(model)
    for _ in range(max_iter):
        w = indicator_target(model)
        w[d] = P[d] @ v
        if np.max(np.abs(w - v)) <= tolerance:
            return w
        v = w
    return v


def evaluate_policy(model: ReachAvoidModel, policy) -> np.ndarray:
    """Success probability of the stationary policy from every state.

    Solved exactly through the induced chain.  When the chain has a closed
    class inside ``K \\ O`` the linear system is singular; a warning is
    issued and the iterative limit is returned instead.
    """
    chain = linear.induce_chain(model, policy)
    try:
        return linear.solve_hitting(chain)
    except linear.SingularChainError:
        warnings.warn(
            "value undefined by linear solve; falling back to iterative evaluation",
            RuntimeWarning,
            stacklevel=2,
        )
        return evaluate_policy_iterative(model, policy)


# ---------------------------------------------------------------------------
# id-keyed dictionaries for JSON
# ---------------------------------------------------------------------------


def value_to_dict(model: ReachAvoidModel, value) -> dict[str, float]:
    return {s: float(v) for s, v in zip(model.states, value)}


def value_from_dict(model: ReachAvoidModel, doc: dict, check: bool = True) -> np.ndarray:
    """Value vector from ``{state: prob}``; missing boundary states get their boundary value.

    With ``check=True`` the result must be in boundary form
    (:class:`BoundaryFormError` otherwise).
    """
    v = np.full(model.n_states, np.nan)
    v[model.target] = 1.0
    v[model.cemetery] = 0.0
    for s, p in doc.items():
        v[model.state_index(s)] = float(p)
    if np.isnan(v).any():
        missing = [model.states[i] for i in np.flatnonzero(np.isnan(v))]
        raise BoundaryFormError(f"no value for states {missing}")
    if check:
        check_boundary_form(model, v)
    return v


def policy_to_dict(model: ReachAvoidModel, policy) -> dict[str, str]:
    return {model.states[x]: model.actions[a] for x, a in enumerate(policy) if a != NO_ACTION}


def policy_from_dict(model: ReachAvoidModel, doc: dict) -> np.ndarray:
    """Policy array from ``{state: action}``; entries off ``K \\ O`` are ignored."""
    policy = np.full(model.n_states, NO_ACTION, dtype=np.int64)
    for s, a in doc.items():
        x = model.state_index(s)
        if model.decision[x]:
            policy[x] = model.action_index(a)
    missing = [model.states[x] for x in np.flatnonzero(model.decision & (policy == NO_ACTION))]
    if missing:
        raise ValueError(f"policy has no action for decision states {missing}")
    return linear._check_policy(model, policy)
