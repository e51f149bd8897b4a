"""Expected total reward accumulated until the process leaves ``K \\ O``.

The criterion is ``E[sum_{t=0}^{τ∧τ'} α^t r(x_t, a_t)]``: a reward is
collected at every decision stage and once more at the stopping state.
Hitting probability is the special case ``r = 1_O``, ``α = 1``.

Value iteration starts from the terminal reward ``v_0 = r·1_{O ∪ (X\\K)}``
and applies

    v_{n+1}(x) = r(x)                                          x ∉ K\\O
    v_{n+1}(x) = max_a [ r(x, a) + α sum_y Q(y|x,a) v_n(y) ]   x ∈ K\\O
"""

from __future__ import annotations

import dataclasses
import json
import os
from typing import Any

import numpy as np

from . import linear
from .bellman import NO_ACTION, SolveResult, TIE_TOLERANCE, evaluate_policy
from .model import ModelFormatError, ReachAvoidModel, all_policies_terminate, require_valid

__all__ = [
    "VARIANTS",
    "RewardSpec",
    "UnboundedRewardError",
    "make_variant",
    "reward_value_iteration",
    "evaluate_reward",
    "check_identity_v3",
    "reward_spec_from_dict",
    "reward_spec_to_dict",
    "load_reward_spec",
]

VARIANTS = ("V1", "V2", "V3", "V4", "V5", "custom")


class UnboundedRewardError(ArithmeticError):
    """Value iterates exceeded the divergence bound."""


@dataclasses.dataclass(frozen=True, eq=False)
class RewardSpec:
    """Reward per stage and discount.

    Parameters
    ----------
    per_stage : ndarray, shape (m, k)
        ``r(x, a)``.  On target and cemetery states the reward must not
        depend on the action.
    discount : float
        ``α`` in (0, 1]; 1 means undiscounted.
    variant : str
        One of ``VARIANTS``.
    gamma : float, optional
        Weight used by the V3 and V5 variants (informational).
    """

    per_stage: np.ndarray
    discount: float = 1.0
    variant: str = "custom"
    gamma: float | None = None

    def __post_init__(self):
        r = np.array(self.per_stage, dtype=float, copy=True)
        if r.ndim != 2:
            raise ValueError("per_stage must have shape (m, k)")
        if not 0.0 < self.discount <= 1.0:
            raise ValueError("discount must lie in (0, 1]")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        r.setflags(write=False)
        object.__setattr__(self, "per_stage", r)

    @property
    def nonnegative(self) -> bool:
        return bool(np.all(self.per_stage >= 0))

    def terminal(self, model: ReachAvoidModel) -> np.ndarray:
        """Action-independent reward on boundary states, 0 on ``K \\ O``."""
        r = self.per_stage[:, 0].copy()
        r[model.decision] = 0.0
        return r

    def shifted(self, c: float) -> "RewardSpec":
        """Same spec with ``c`` added to every reward (a translation)."""
        return RewardSpec(self.per_stage + c, self.discount, "custom")


def _state_reward(model: ReachAvoidModel, values) -> np.ndarray:
    return np.repeat(np.asarray(values, dtype=float)[:, None], model.n_actions, axis=1)


def make_variant(
    tag: str, model: ReachAvoidModel, gamma: float | None = None, alpha: float | None = None
) -> RewardSpec:
    """Reward spec of a named variant.

    ``V1``: ``1_O`` discounted by ``alpha`` (required, in (0, 1)).
    ``V2``: ``1_O - 1_{X\\O}``.
    ``V3``: ``1_O - gamma·1_{X\\K}`` (``gamma >= 0``, default 1).
    ``V4``: ``1_{K\\O}``.
    ``V5``: ``gamma·1_O - 1_{K\\O}`` (``gamma >= 1`` required).
    """
    O = model.target.astype(float)
    D = model.decision.astype(float)
    C = model.cemetery.astype(float)
    if tag == "V1":
        if alpha is None or not 0.0 < alpha < 1.0:
            raise ValueError("V1 needs a discount factor alpha in (0, 1)")
        return RewardSpec(_state_reward(model, O), alpha, "V1")
    if alpha is not None and alpha != 1.0:
        raise ValueError(f"{tag} is undiscounted")
    if tag == "V2":
        return RewardSpec(_state_reward(model, O - (1.0 - O)), 1.0, "V2")
    if tag == "V3":
        g = 1.0 if gamma is None else float(gamma)
        if g < 0:
            raise ValueError("V3 needs gamma >= 0")
        return RewardSpec(_state_reward(model, O - g * C), 1.0, "V3", g)
    if tag == "V4":
        return RewardSpec(_state_reward(model, D), 1.0, "V4")
    if tag == "V5":
        if gamma is None or gamma < 1.0:
            raise ValueError("V5 needs gamma >= 1")
        return RewardSpec(_state_reward(model, gamma * O - D), 1.0, "V5", float(gamma))
    raise ValueError(f"unknown variant {tag!r}")


def _check_applicable(model: ReachAvoidModel, spec: RewardSpec, every_policy: bool = True) -> None:
    if spec.per_stage.shape != (model.n_states, model.n_actions):
        raise ValueError(
            f"per_stage must have shape ({model.n_states}, {model.n_actions}), got {spec.per_stage.shape}"
        )
    boundary = ~model.decision
    r = spec.per_stage[boundary]
    if np.any(r != r[:, :1]):
        raise ValueError("reward on target/cemetery states must not depend on the action")
    if every_policy and not spec.nonnegative and not all_policies_terminate(model):
        raise ValueError(
            "signed rewards need τ∧τ' finite under every policy; the model has possibly-infinite-horizon states"
        )


def reward_value_iteration(
    model: ReachAvoidModel,
    spec: RewardSpec,
    tolerance: float = 1e-12,
    max_iter: int = 1_000_000,
    bound: float = 1e9,
) -> SolveResult:
    """Optimal expected total reward until exit, with a greedy policy.

    Raises
    ------
    ValueError
        Signed rewards on a model where some policy may never stop.
    UnboundedRewardError
        If an iterate exceeds ``bound`` in sup-norm.
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    require_valid(model)
    _check_applicable(model, spec)
    d = model.decision
    r = spec.per_stage
    alpha = spec.discount
    v = spec.terminal(model)
    converged = False
    n = 0

    def backup(v):
        q = r + alpha * (model.kernel @ v)
        return np.where(model.feasible, q, -np.inf)

    def sweep(v):
        w = spec.terminal(model)
        w[d] = backup(v)[d].max(axis=1)
        return w

    for n in range(max_iter):
        w = sweep(v)
        if np.max(np.abs(w)) > bound:
            raise UnboundedRewardError(f"unbounded total reward: iterate exceeded {bound:g} after {n + 1} sweeps")
        residual = float(np.max(np.abs(w - v)))
        if residual <= tolerance:
            converged = True
            break
        v = w
    else:
        n = max_iter
        residual = float(np.max(np.abs(sweep(v) - v)))

    q = backup(v)
    best = q.max(axis=1, keepdims=True)
    mask = model.feasible & (q >= best - TIE_TOLERANCE * max(1.0, float(np.max(np.abs(v)))))
    mask[~d] = False
    policy = np.full(model.n_states, NO_ACTION, dtype=np.int64)
    policy[d] = np.argmax(mask[d], axis=1)
    return SolveResult(
        value=v,
        policy=policy,
        iterations=n,
        residual=residual,
        converged=converged,
        tolerance=tolerance,
        ties=int((mask.sum(axis=1) > 1).sum()),
    )


def evaluate_reward(model: ReachAvoidModel, spec: RewardSpec, policy) -> np.ndarray:
    """Expected total reward of a stationary policy, by a linear solve on ``K \\ O``.

    Raises
    ------
    linear.SingularChainError
        When the policy has a closed class inside ``K \\ O`` and ``α = 1``.
    """
    _check_applicable(model, spec, every_policy=False)
    chain = linear.induce_chain(model, policy)
    policy = np.asarray(policy)
    d = np.flatnonzero(model.decision)
    term = spec.terminal(model)
    v = term.copy()
    if d.size:
        P = chain.kernel
        A = np.eye(d.size) - spec.discount * P[np.ix_(d, d)]
        b = spec.per_stage[d, policy[d]] + spec.discount * (P[d] @ term)
        cond = np.linalg.cond(A, 1)
        if not cond < linear.CONDITION_LIMIT:
            raise linear.SingularChainError(f"closed class inside K\\O: condition number {cond:.3g}")
        v[d] = np.linalg.solve(A, b)
    return v


def check_identity_v3(model: ReachAvoidModel, policy, atol: float = 1e-8) -> dict[str, Any]:
    """Compare the V3 value of ``policy`` with ``2 V(policy) - 1`` on ``K \\ O``.

    Returns a report with ``status`` ``"pass"``, ``"fail"`` or ``"skipped"``
    (when the policy may never stop, so the identity need not hold).
    """
    chain = linear.induce_chain(model, policy)
    d = model.decision
    try:
        # both absorption probabilities must add to one for the identity
        escape = linear.solve_hitting(chain) + linear.solve_hitting(chain, reach="cemetery")
    except linear.SingularChainError as exc:
        return {"status": "skipped", "reason": str(exc)}
    if np.any(np.abs(escape[d] - 1.0) > atol):
        return {"status": "skipped", "reason": "τ∧τ' is not almost surely finite under the policy"}
    v3 = evaluate_reward(model, make_variant("V3", model), policy)
    hit = evaluate_policy(model, policy)
    gap = np.abs(v3 - (2.0 * hit - 1.0))
    max_gap = float(gap[d].max()) if d.any() else 0.0
    return {
        "status": "pass" if max_gap <= atol else "fail",
        "max_gap": max_gap,
        "v3": v3,
        "hit_probability": hit,
        "tolerance": atol,
    }


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def reward_spec_from_dict(model: ReachAvoidModel, doc: dict[str, Any]) -> RewardSpec:
    """Parse ``{"variant", "alpha", "gamma", "per_stage"}``.

    A named variant without ``per_stage`` is built with :func:`make_variant`.
    ``per_stage`` maps each state either to a number or to ``{action: r}``;
    unlisted states get reward 0.
    """
    if not isinstance(doc, dict):
        raise ModelFormatError("reward spec must be a JSON object")
    variant = doc.get("variant", "custom")
    if variant not in VARIANTS:
        raise ModelFormatError(f"unknown variant {variant!r}", "variant")
    alpha = doc.get("alpha")
    gamma = doc.get("gamma")
    if "per_stage" not in doc:
        if variant == "custom":
            raise ModelFormatError("custom reward needs per_stage", "per_stage")
        try:
            return make_variant(variant, model, gamma=gamma, alpha=alpha)
        except ValueError as exc:
            raise ModelFormatError(str(exc), "variant") from None
    r = np.zeros((model.n_states, model.n_actions))
    pdoc = doc["per_stage"]
    if not isinstance(pdoc, dict):
        raise ModelFormatError("expected an object keyed by state", "per_stage")
    for s, val in pdoc.items():
        try:
            x = model.state_index(s)
        except KeyError:
            raise ModelFormatError(f"unknown state {s!r}", "per_stage") from None
        if isinstance(val, dict):
            for a, rv in val.items():
                try:
                    r[x, model.action_index(a)] = float(rv)
                except KeyError:
                    raise ModelFormatError(f"unknown action {a!r}", f"per_stage.{s}") from None
        else:
            r[x, :] = float(val)
    return RewardSpec(r, 1.0 if alpha is None else float(alpha), variant,
                      None if gamma is None else float(gamma))


def reward_spec_to_dict(model: ReachAvoidModel, spec: RewardSpec) -> dict[str, Any]:
    per_stage: dict[str, Any] = {}
    for x, s in enumerate(model.states):
        row = spec.per_stage[x]
        if not model.decision[x] or np.all(row == row[0]):
            per_stage[s] = float(row[0])
        else:
            per_stage[s] = {model.actions[a]: float(row[a]) for a in range(model.n_actions)}
    return {"variant": spec.variant, "alpha": spec.discount, "gamma": spec.gamma, "per_stage": per_stage}


def load_reward_spec(model: ReachAvoidModel, source) -> RewardSpec:
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = source.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None
    return reward_spec_from_dict(model, doc)
