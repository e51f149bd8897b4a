"""Finite reach-avoid control models.

A model is a controlled Markov chain on states ``0..m-1`` with actions
``0..k-1``, a target set ``O`` and a safe set ``K`` with ``O ⊊ K``.  The
process is stopped on first entry to ``O`` (success) or to ``X \\ K``
(the cemetery).  Control is applied only on the decision states ``K \\ O``,
so feasibility and transition rows are only meaningful there; anything given
for target or cemetery states is accepted and dropped.

States and actions carry string identifiers for the JSON format and dense
integer indices for computation.
"""

from __future__ import annotations

import dataclasses
import enum
import io
import json
import os
from collections import deque
from typing import Any

import numpy as np

__all__ = [
    "ROW_TOLERANCE",
    "StateClass",
    "ReachAvoidModel",
    "Issue",
    "ValidationReport",
    "ModelFormatError",
    "InvalidModelError",
    "classify_states",
    "validate_model",
    "require_valid",
    "loiter_states",
    "all_policies_terminate",
    "model_from_dict",
    "model_to_dict",
    "load_model",
    "save_model",
]

#: Largest tolerated deviation of a transition row sum from one.
ROW_TOLERANCE = 1e-9

# Rows closer to one than this are left bit-for-bit alone so that
# renormalization is idempotent across save/load cycles.
_NOISE_FLOOR = 1e-12


class StateClass(enum.IntEnum):
    """Partition of the state space induced by ``O`` and ``K``."""

    TARGET = 0
    CEMETERY = 1
    DECISION = 2


class ModelFormatError(ValueError):
    """Structurally malformed model input (bad shape, unknown id, missing field).

    Parameters
    ----------
    message : str
        What is wrong.
    location : str, optional
        Field path (``"kernel.s1.up"``) or ``"line L column C"`` for JSON
        syntax errors.
    """

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class InvalidModelError(ValueError):
    """A model failed :func:`validate_model`; ``report`` holds the violations."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        lines = "; ".join(str(v) for v in report.violations)
        super().__init__(f"invalid model: {lines}")


def _as_frozen(a, dtype) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclasses.dataclass(frozen=True, eq=False)
class ReachAvoidModel:
    """Finite controlled chain with target and safe sets.

    Parameters
    ----------
    kernel : array_like, shape (m, k, m)
        ``kernel[x, a, y] = Q(y | x, a)``.  Only rows with ``x`` a decision
        state and ``a`` feasible are kept; the rest are zeroed.
    target, safe : array_like of bool, shape (m,)
        Indicators of ``O`` and ``K``.
    feasible : array_like of bool, shape (m, k), optional
        ``A(x)``.  Defaults to every action whose row carries mass.
    states, actions : sequence of str, optional
        Identifiers; default ``"0".."m-1"`` and ``"0".."k-1"``.
    coordinates : array_like, shape (m,), optional
        Positions of the states on a line, used only for plotting.

    Notes
    -----
    Rows whose sum is within ``ROW_TOLERANCE`` of one are renormalized.  Rows
    further off are kept as given and reported by :func:`validate_model`.
    Instances are immutable.
    """

    kernel: np.ndarray
    target: np.ndarray
    safe: np.ndarray
    feasible: np.ndarray | None = None
    states: tuple[str, ...] | None = None
    actions: tuple[str, ...] | None = None
    coordinates: np.ndarray | None = None

    def __post_init__(self):
        kernel = np.array(self.kernel, dtype=float, copy=True)
        if kernel.ndim == 2:
            kernel = kernel[:, None, :]
        if kernel.ndim != 3 or kernel.shape[0] != kernel.shape[2]:
            raise ModelFormatError(f"kernel must have shape (m, k, m), got {kernel.shape}", "kernel")
        m, k, _ = kernel.shape
        target = np.asarray(self.target, dtype=bool)
        safe = np.asarray(self.safe, dtype=bool)
        for name, arr in (("target", target), ("safe", safe)):
            if arr.shape != (m,):
                raise ModelFormatError(f"expected shape ({m},), got {arr.shape}", name)
        if self.feasible is None:
            feasible = np.abs(kernel).sum(axis=2) > 0
        else:
            feasible = np.asarray(self.feasible, dtype=bool)
            if feasible.shape != (m, k):
                raise ModelFormatError(f"expected shape ({m}, {k}), got {feasible.shape}", "feasible")

        decision = safe & ~target
        feasible = feasible & decision[:, None]
        kernel[~feasible] = 0.0

        sums = kernel.sum(axis=2)
        dev = np.abs(sums - 1.0)
        fix = feasible & (dev > _NOISE_FLOOR) & (dev <= ROW_TOLERANCE)
        kernel[fix] /= sums[fix][:, None]

        states = tuple(str(s) for s in self.states) if self.states is not None else tuple(str(i) for i in range(m))
        actions = tuple(str(a) for a in self.actions) if self.actions is not None else tuple(str(i) for i in range(k))
        if len(states) != m or len(set(states)) != m:
            raise ModelFormatError(f"need {m} distinct state ids, got {len(set(states))}", "states")
        if len(actions) != k or len(set(actions)) != k:
            raise ModelFormatError(f"need {k} distinct action ids, got {len(set(actions))}", "actions")

        coords = None
        if self.coordinates is not None:
            coords = _as_frozen(self.coordinates, float)
            if coords.shape != (m,):
                raise ModelFormatError(f"expected shape ({m},), got {coords.shape}", "coordinates")

        set_ = object.__setattr__
        set_(self, "kernel", _as_frozen(kernel, float))
        set_(self, "target", _as_frozen(target, bool))
        set_(self, "safe", _as_frozen(safe, bool))
        set_(self, "feasible", _as_frozen(feasible, bool))
        set_(self, "states", states)
        set_(self, "actions", actions)
        set_(self, "coordinates", coords)
        classes = np.full(m, StateClass.DECISION, dtype=np.int8)
        classes[target] = StateClass.TARGET
        classes[~safe] = StateClass.CEMETERY
        set_(self, "classes", _as_frozen(classes, np.int8))

    @property
    def n_states(self) -> int:
        return self.kernel.shape[0]

    @property
    def n_actions(self) -> int:
        return self.kernel.shape[1]

    @property
    def decision(self) -> np.ndarray:
        """Boolean mask of ``K \\ O``."""
        return self.classes == StateClass.DECISION

    @property
    def cemetery(self) -> np.ndarray:
        """Boolean mask of ``X \\ K``."""
        return ~self.safe

    def state_index(self, state: str | int) -> int:
        if isinstance(state, (int, np.integer)) and not isinstance(state, bool):
            if 0 <= state < self.n_states:
                return int(state)
            raise KeyError(f"state index {state} out of range")
        try:
            return self.states.index(str(state))
        except ValueError:
            raise KeyError(f"unknown state {state!r}") from None

    def action_index(self, action: str | int) -> int:
        if isinstance(action, (int, np.integer)) and not isinstance(action, bool):
            if 0 <= action < self.n_actions:
                return int(action)
            raise KeyError(f"action index {action} out of range")
        try:
            return self.actions.index(str(action))
        except ValueError:
            raise KeyError(f"unknown action {action!r}") from None

    def __eq__(self, other):
        if not isinstance(other, ReachAvoidModel):
            return NotImplemented
        coords_equal = (self.coordinates is None and other.coordinates is None) or (
            self.coordinates is not None
            and other.coordinates is not None
            and np.array_equal(self.coordinates, other.coordinates)
        )
        return (
            self.states == other.states
            and self.actions == other.actions
            and np.array_equal(self.kernel, other.kernel)
            and np.array_equal(self.target, other.target)
            and np.array_equal(self.safe, other.safe)
            and np.array_equal(self.feasible, other.feasible)
            and coords_equal
        )

    __hash__ = None

    def __repr__(self):
        return (
            f"ReachAvoidModel(n_states={self.n_states}, n_actions={self.n_actions}, "
            f"target={int(self.target.sum())}, decision={int(self.decision.sum())}, "
            f"cemetery={int(self.cemetery.sum())})"
        )


def classify_states(model: ReachAvoidModel) -> dict[str, StateClass]:
    """Map each state id to Target, Cemetery or Decision."""
    return {s: StateClass(c) for s, c in zip(model.states, model.classes)}


@dataclasses.dataclass(frozen=True)
class Issue:
    kind: str
    message: str
    states: tuple[str, ...] = ()

    def __str__(self):
        return f"{self.kind}: {self.message}"


@dataclasses.dataclass
class ValidationReport:
    violations: list[Issue] = dataclasses.field(default_factory=list)
    warnings: list[Issue] = dataclasses.field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {i.kind for i in self.violations} | {i.kind for i in self.warnings}

    def to_dict(self) -> dict:
        def enc(items):
            return [{"kind": i.kind, "message": i.message, "states": list(i.states)} for i in items]

        return {"ok": self.ok, "violations": enc(self.violations), "warnings": enc(self.warnings)}


def loiter_states(model: ReachAvoidModel) -> np.ndarray:
    """Decision states from which some stationary policy may never stop.

    Returns the mask of decision states from which, for a suitable
    deterministic stationary policy, ``τ ∧ τ'`` is infinite with positive
    probability.  Computed as the states that can reach the largest set
    ``S ⊆ K \\ O`` such that every state of ``S`` has a feasible action whose
    support stays in ``S``.
    """
    decision = model.decision
    support = model.kernel > 0
    stay = decision.copy()
    while True:
        # an action keeps x inside `stay` iff its support avoids everything else
        leaks = (support & ~stay[None, None, :]).any(axis=2)
        keeps = (model.feasible & ~leaks).any(axis=1)
        new = stay & keeps
        if np.array_equal(new, stay):
            break
        stay = new

    reach = stay.copy()
    # backward search: x reaches `reach` if some feasible action puts mass there
    frontier = deque(np.flatnonzero(reach))
    edge = (support & model.feasible[:, :, None]).any(axis=1)
    while frontier:
        y = frontier.popleft()
        for x in np.flatnonzero(edge[:, y] & decision & ~reach):
            reach[x] = True
            frontier.append(x)
    return reach


def all_policies_terminate(model: ReachAvoidModel) -> bool:
    """True when ``τ ∧ τ'`` is a.s. finite under every stationary policy."""
    return not loiter_states(model).any()


def validate_model(model: ReachAvoidModel) -> ValidationReport:
    """Check the structural assumptions of a reach-avoid model.

    Violations: ``O`` not strictly inside ``K``, a decision state without
    feasible actions, negative transition entries, row sums off by more than
    ``ROW_TOLERANCE``.  Warnings: empty target, and decision states from which
    the stopping time may be infinite (``possibly-infinite-horizon``).
    """
    rep = ValidationReport()
    names = model.states
    target, safe, decision = model.target, model.safe, model.decision

    outside = np.flatnonzero(target & ~safe)
    if outside.size:
        rep.violations.append(
            Issue("target-outside-safe", "target states must lie in the safe set", tuple(names[i] for i in outside))
        )
    if not decision.any():
        rep.violations.append(Issue("no-decision-states", "target must be a strict subset of the safe set"))
    if not target.any():
        rep.warnings.append(Issue("empty-target", "target set is empty; the value is identically zero"))

    stuck = np.flatnonzero(decision & ~model.feasible.any(axis=1))
    if stuck.size:
        rep.violations.append(
            Issue("no-feasible-action", "decision state without feasible actions", tuple(names[i] for i in stuck))
        )

    rows = model.feasible
    neg = np.argwhere(rows & (model.kernel < 0).any(axis=2))
    for x, a in neg:
        rep.violations.append(
            Issue("negative-probability", f"negative entry in row ({names[x]}, {model.actions[a]})", (names[x],))
        )
    sums = model.kernel.sum(axis=2)
    bad = np.argwhere(rows & (np.abs(sums - 1.0) > ROW_TOLERANCE))
    for x, a in bad:
        rep.violations.append(
            Issue(
                "row-sum",
                f"row ({names[x]}, {model.actions[a]}) sums to {sums[x, a]!r}",
                (names[x],),
            )
        )

    if rep.ok:
        loiter = np.flatnonzero(loiter_states(model))
        if loiter.size:
            rep.warnings.append(
                Issue(
                    "possibly-infinite-horizon",
                    "some stationary policy keeps the process in K\\O forever with positive probability",
                    tuple(names[i] for i in loiter),
                )
            )
    return rep


def require_valid(model: ReachAvoidModel) -> ValidationReport:
    """Validate and raise :class:`InvalidModelError` on any violation."""
    rep = validate_model(model)
    if not rep.ok:
        raise InvalidModelError(rep)
    return rep


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

_REQUIRED = ("states", "actions", "target", "safe", "kernel")


def _id_list(doc, field) -> list[str]:
    value = doc[field]
    if not isinstance(value, list):
        raise ModelFormatError("expected a list of ids", field)
    return [str(v) for v in value]


def _lookup(index: dict[str, int], key, location: str, what: str) -> int:
    try:
        return index[str(key)]
    except KeyError:
        raise ModelFormatError(f"unknown {what} {key!r}", location) from None


def _prob(value, location: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ModelFormatError(f"expected a number, got {value!r}", location)
    try:
        return float(value)
    except ValueError:
        raise ModelFormatError(f"expected a number, got {value!r}", location) from None


def model_from_dict(doc: dict[str, Any]) -> ReachAvoidModel:
    """Build a model from the canonical JSON document structure.

    Transition rows may be sparse (only nonzero entries).  When ``feasible``
    is omitted for a state, the actions listed under its kernel entry are used.
    """
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    for field in _REQUIRED:
        if field not in doc:
            raise ModelFormatError("missing required field", field)
    states = _id_list(doc, "states")
    actions = _id_list(doc, "actions")
    s_index = {s: i for i, s in enumerate(states)}
    a_index = {a: i for i, a in enumerate(actions)}
    if len(s_index) != len(states):
        raise ModelFormatError("duplicate state id", "states")
    if len(a_index) != len(actions):
        raise ModelFormatError("duplicate action id", "actions")
    m, k = len(states), len(actions)

    target = np.zeros(m, dtype=bool)
    safe = np.zeros(m, dtype=bool)
    for field, mask in (("target", target), ("safe", safe)):
        for s in _id_list(doc, field):
            mask[_lookup(s_index, s, field, "state")] = True

    kernel = np.zeros((m, k, m))
    kdoc = doc["kernel"]
    if not isinstance(kdoc, dict):
        raise ModelFormatError("expected an object keyed by state", "kernel")
    listed = np.zeros((m, k), dtype=bool)
    for s, by_action in kdoc.items():
        x = _lookup(s_index, s, "kernel", "state")
        if not isinstance(by_action, dict):
            raise ModelFormatError("expected an object keyed by action", f"kernel.{s}")
        for a, row in by_action.items():
            loc = f"kernel.{s}"
            u = _lookup(a_index, a, loc, "action")
            loc = f"kernel.{s}.{a}"
            listed[x, u] = True
            if isinstance(row, list):
                if len(row) != m:
                    raise ModelFormatError(f"dense row must have {m} entries, got {len(row)}", loc)
                kernel[x, u] = [_prob(p, f"{loc}[{j}]") for j, p in enumerate(row)]
            elif isinstance(row, dict):
                for t, p in row.items():
                    y = _lookup(s_index, t, loc, "state")
                    kernel[x, u, y] += _prob(p, f"{loc}.{t}")
            else:
                raise ModelFormatError("row must be an object or a list", loc)

    feasible = listed.copy()
    fdoc = doc.get("feasible")
    if fdoc is not None:
        if not isinstance(fdoc, dict):
            raise ModelFormatError("expected an object keyed by state", "feasible")
        for s, acts in fdoc.items():
            x = _lookup(s_index, s, "feasible", "state")
            if not isinstance(acts, list):
                raise ModelFormatError("expected a list of action ids", f"feasible.{s}")
            feasible[x] = False
            for a in acts:
                feasible[x, _lookup(a_index, a, f"feasible.{s}", "action")] = True

    coords = None
    if "coordinates" in doc:
        cdoc = doc["coordinates"]
        if not isinstance(cdoc, dict) or set(cdoc) != set(states):
            raise ModelFormatError("expected one number per state", "coordinates")
        coords = [_prob(cdoc[s], f"coordinates.{s}") for s in states]

    return ReachAvoidModel(
        kernel=kernel, target=target, safe=safe, feasible=feasible,
        states=states, actions=actions, coordinates=coords,
    )


def model_to_dict(model: ReachAvoidModel) -> dict[str, Any]:
    """Canonical JSON structure; transition rows are written sparsely."""
    S, A = model.states, model.actions
    decision = model.decision
    doc: dict[str, Any] = {
        "states": list(S),
        "actions": list(A),
        "target": [S[i] for i in np.flatnonzero(model.target)],
        "safe": [S[i] for i in np.flatnonzero(model.safe)],
        "feasible": {S[x]: [A[a] for a in np.flatnonzero(model.feasible[x])] for x in np.flatnonzero(decision)},
        "kernel": {
            S[x]: {
                A[a]: {S[y]: float(model.kernel[x, a, y]) for y in np.flatnonzero(model.kernel[x, a])}
                for a in np.flatnonzero(model.feasible[x])
            }
            for x in np.flatnonzero(decision)
        },
    }
    if model.coordinates is not None:
        doc["coordinates"] = {s: float(c) for s, c in zip(S, model.coordinates)}
    return doc


def _read_json(source) -> Any:
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = source.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None


def _write_json(doc, target) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if isinstance(target, (str, os.PathLike)):
        with open(target, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        target.write(text)


def load_model(source) -> ReachAvoidModel:
    """Read a model from a path or a text stream."""
    return model_from_dict(_read_json(source))


def save_model(model: ReachAvoidModel, target) -> None:
    """Write a model to a path or a text stream."""
    _write_json(model_to_dict(model), target)


def dumps_model(model: ReachAvoidModel) -> str:
    buf = io.StringIO()
    save_model(model, buf)
    return buf.getvalue()
