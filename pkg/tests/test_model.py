import io
import json
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reachavoid.library import gambler_ruin, random_model
from reachavoid.model import (
    InvalidModelError,
    ModelFormatError,
    ReachAvoidModel,
    StateClass,
    classify_states,
    dumps_model,
    load_model,
    loiter_states,
    model_from_dict,
    model_to_dict,
    require_valid,
    save_model,
    validate_model,
)


def two_state():
    # state 0 is the target, state 1 moves there surely
    kernel = np.zeros((2, 1, 2))
    kernel[1, 0, 0] = 1.0
    return ReachAvoidModel(kernel, target=[True, False], safe=[True, True])


def test_minimal_model_is_valid():
    rep = validate_model(two_state())
    assert rep.ok
    assert rep.warnings == []


def test_row_sum_violation_names_pair():
    kernel = np.zeros((3, 2, 3))
    kernel[2, 0] = [0.5, 0.45, 0.0]
    kernel[2, 1] = [0.5, 0.5, 0.0]
    m = ReachAvoidModel(kernel, [True, False, False], [True, False, True], states=["o", "c", "d"], actions=["a", "b"])
    rep = validate_model(m)
    assert not rep.ok
    (v,) = rep.violations
    assert v.kind == "row-sum"
    assert "(d, a)" in v.message
    with pytest.raises(InvalidModelError):
        require_valid(m)


def test_negative_entry_violation():
    kernel = np.zeros((3, 1, 3))
    kernel[2, 0] = [1.2, -0.2, 0.0]
    m = ReachAvoidModel(kernel, [True, False, False], [True, False, True])
    assert "negative-probability" in validate_model(m).kinds()


def test_small_row_error_is_renormalized():
    kernel = np.zeros((3, 1, 3))
    kernel[2, 0] = [0.5, 0.5 + 5e-10, 0.0]
    m = ReachAvoidModel(kernel, [True, False, False], [True, False, True])
    assert validate_model(m).ok
    assert abs(m.kernel[2, 0].sum() - 1.0) < 1e-15


def test_self_loop_warns_infinite_horizon():
    kernel = np.zeros((4, 2, 4))
    kernel[2, 0, 2] = 1.0
    kernel[2, 1, 2] = 1.0
    kernel[3, 0, 0] = 1.0
    m = ReachAvoidModel(kernel, [True, False, False, False], [True, False, True, True])
    rep = validate_model(m)
    assert rep.ok
    (w,) = rep.warnings
    assert w.kind == "possibly-infinite-horizon"
    assert w.states == ("2",)


def test_structural_violations():
    kernel = np.zeros((2, 1, 2))
    m = ReachAvoidModel(kernel, [True, False], [False, True])
    kinds = validate_model(m).kinds()
    assert {"target-outside-safe", "no-feasible-action"} <= kinds
    only_target = ReachAvoidModel(np.zeros((2, 1, 2)), [True, False], [True, False])
    assert "no-decision-states" in validate_model(only_target).kinds()


def test_empty_target_warns():
    kernel = np.zeros((2, 1, 2))
    kernel[1, 0, 0] = 1.0
    m = ReachAvoidModel(kernel, [False, False], [False, True])
    rep = validate_model(m)
    assert rep.ok and "empty-target" in rep.kinds()


def test_classification_gambler():
    cls = classify_states(gambler_ruin(10))
    assert cls["10"] == StateClass.TARGET
    assert cls["0"] == StateClass.CEMETERY
    assert all(cls[str(i)] == StateClass.DECISION for i in range(1, 10))


def test_single_decision_state():
    kernel = np.zeros((4, 1, 4))
    kernel[3, 0] = [0.25, 0.25, 0.25, 0.25]
    m = ReachAvoidModel(kernel, [True, True, False, False], [True, True, False, True])
    assert m.decision.sum() == 1


def test_whole_space_safe_has_no_cemetery():
    kernel = np.zeros((3, 1, 3))
    kernel[1, 0] = [0.5, 0.0, 0.5]
    kernel[2, 0] = [0.5, 0.5, 0.0]
    m = ReachAvoidModel(kernel, [True, False, False], [True, True, True])
    assert not m.cemetery.any()
    assert set(classify_states(m).values()) == {StateClass.TARGET, StateClass.DECISION}


def test_boundary_rows_ignored():
    kernel = np.full((2, 1, 2), 0.5)
    m = ReachAvoidModel(kernel, [True, False], [True, True])
    assert np.all(m.kernel[0] == 0)


def test_model_is_immutable():
    m = gambler_ruin(4)
    with pytest.raises(ValueError):
        m.kernel[1, 0, 2] = 0.3


CANONICAL = {
    "states": ["goal", "dead", "s"],
    "actions": ["safe", "risky"],
    "target": ["goal"],
    "safe": ["goal", "s"],
    "feasible": {"s": ["safe", "risky"]},
    "kernel": {"s": {"safe": {"goal": 0.3, "dead": 0.7}, "risky": [0.6, 0.4, 0.0]}},
}


def test_canonical_document():
    m = model_from_dict(CANONICAL)
    assert m.states == ("goal", "dead", "s")
    assert m.kernel[2, 0, 0] == 0.3
    assert m.kernel[2, 1, 0] == 0.6
    assert validate_model(m).ok


def test_feasible_inferred_from_kernel():
    doc = {k: v for k, v in CANONICAL.items() if k != "feasible"}
    assert model_from_dict(doc).feasible[2].all()


@pytest.mark.parametrize("field", ["states", "actions", "target", "safe", "kernel"])
def test_missing_field(field):
    doc = {k: v for k, v in CANONICAL.items() if k != field}
    with pytest.raises(ModelFormatError) as exc:
        model_from_dict(doc)
    assert exc.value.location == field


def test_unknown_id_and_bad_row_length():
    doc = json.loads(json.dumps(CANONICAL))
    doc["kernel"]["s"]["safe"] = {"nowhere": 1.0}
    with pytest.raises(ModelFormatError, match="nowhere"):
        model_from_dict(doc)
    doc = json.loads(json.dumps(CANONICAL))
    doc["kernel"]["s"]["risky"] = [1.0, 0.0]
    with pytest.raises(ModelFormatError) as exc:
        model_from_dict(doc)
    assert exc.value.location == "kernel.s.risky"


def test_json_syntax_error_has_line():
    with pytest.raises(ModelFormatError) as exc:
        load_model(io.StringIO('{\n  "states": [1,\n}'))
    assert exc.value.location.startswith("line 3")


def test_structural_error_differs_from_violation():
    assert not issubclass(ModelFormatError, InvalidModelError)


def test_round_trip_file(tmp_path):
    m = gambler_ruin(6, 0.3)
    path = tmp_path / "m.json"
    save_model(m, path)
    assert load_model(path) == m
    assert dumps_model(load_model(path)) == dumps_model(m)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_round_trip_random(seed):
    m = random_model(np.random.default_rng(seed), escape=False)
    back = load_model(io.StringIO(dumps_model(m)))
    assert back == m
    assert model_to_dict(back) == model_to_dict(m)


def trap_oracle(m):
    """Decision states that can reach a set some policy never leaves, by explicit graph search."""
    d = [x for x in range(m.n_states) if m.decision[x]]
    trapped = set(d)
    changed = True
    while changed:
        changed = False
        for x in list(trapped):
            ok = any(
                m.feasible[x, a] and all(y in trapped for y in np.flatnonzero(m.kernel[x, a] > 0))
                for a in range(m.n_actions)
            )
            if not ok:
                trapped.discard(x)
                changed = True
    out = set()
    for x in d:
        seen, queue = {x}, deque([x])
        while queue:
            u = queue.popleft()
            if u in trapped:
                out.add(x)
                break
            if not m.decision[u]:
                continue
            for a in range(m.n_actions):
                if m.feasible[u, a]:
                    for y in np.flatnonzero(m.kernel[u, a] > 0):
                        if y not in seen:
                            seen.add(y)
                            queue.append(y)
    return out


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 0.6))
def test_loiter_states_match_graph_search(seed, density):
    m = random_model(np.random.default_rng(seed), n_states=(3, 10), density=density, escape=False)
    assert set(np.flatnonzero(loiter_states(m))) == trap_oracle(m)
