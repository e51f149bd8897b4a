import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reachavoid import linear
from reachavoid.bellman import (
    BoundaryFormError,
    apply_T,
    bellman_residual,
    check_boundary_form,
    count_ties,
    evaluate_policy,
    extract_policy,
    indicator_target,
    policy_from_dict,
    policy_to_dict,
    value_from_dict,
    value_iteration,
    value_to_dict,
)
from reachavoid.library import gambler_ruin, random_model, red_and_black
from reachavoid.model import ReachAvoidModel


def ruin(p, n=10):
    if p == 0.5:
        return np.arange(n + 1) / n
    r = (1 - p) / p
    return (r ** np.arange(n + 1) - 1) / (r**n - 1)


def choice_model(p_good=0.7, p_bad=0.3):
    """One decision state ``d`` with two actions reaching the target w.p. 0.3 / 0.7."""
    kernel = np.zeros((3, 2, 3))
    kernel[2, 0] = [p_bad, 1 - p_bad, 0]
    kernel[2, 1] = [p_good, 1 - p_good, 0]
    return ReachAvoidModel(kernel, [True, False, False], [True, False, True], states=["o", "c", "d"])


def test_T_of_indicator_is_one_step_reach():
    m = gambler_ruin(10)
    u = indicator_target(m)
    v = apply_T(m, u)
    assert v[9] == 0.5
    assert v[10] == 1.0 and v[0] == 0.0
    assert np.all(v[1:9] == 0.0)


def test_T_sure_jump():
    kernel = np.zeros((4, 2, 4))
    kernel[2:, 0, 1] = 1.0
    kernel[2:, 1, 0] = 1.0
    m = ReachAvoidModel(kernel, [True, False, False, False], [True, False, True, True])
    assert np.all(apply_T(m, indicator_target(m))[2:] == 1.0)


@pytest.mark.parametrize("p", [0.5, 0.4, 0.55])
def test_value_iteration_ruin(p):
    res = value_iteration(gambler_ruin(10, p))
    assert res.converged
    assert np.max(np.abs(res.value - ruin(p))) <= 1e-9


def test_zero_iterations():
    m = gambler_ruin(10)
    res = value_iteration(m, max_iter=0)
    assert not res.converged
    assert np.array_equal(res.value, indicator_target(m))


def test_tolerance_must_be_positive():
    with pytest.raises(ValueError):
        value_iteration(gambler_ruin(4), tolerance=0.0)


def test_extract_policy_prefers_higher_reach():
    m = choice_model()
    assert extract_policy(m, indicator_target(m))[2] == 1
    m = choice_model(0.3, 0.7)
    assert extract_policy(m, indicator_target(m))[2] == 0


def test_extract_policy_lowest_index_on_tie():
    m = choice_model(0.5, 0.5)
    v = indicator_target(m)
    assert extract_policy(m, v)[2] == 0
    assert count_ties(m, v) == 1


def test_single_action_policy():
    m = gambler_ruin(5)
    pol = extract_policy(m, value_iteration(m).value)
    assert np.all(pol[m.decision] == 0)
    assert pol[0] == -1 and pol[5] == -1


def test_infeasible_action_never_chosen():
    m = red_and_black(10, 0.4)
    res = value_iteration(m)
    d = np.flatnonzero(m.decision)
    assert m.feasible[d, res.policy[d]].all()


def test_residual_examples():
    m = choice_model()
    vstar = np.array([1.0, 0.0, 0.7])
    assert bellman_residual(m, vstar) <= 1e-12
    assert bellman_residual(m, indicator_target(m)) == pytest.approx(0.7)
    res = value_iteration(gambler_ruin(10), tolerance=1e-10)
    assert bellman_residual(gambler_ruin(10), res.value) <= 1e-9


def test_evaluate_policy_examples():
    m = gambler_ruin(10)
    pol = np.zeros(11, dtype=int)
    assert np.max(np.abs(evaluate_policy(m, pol) - ruin(0.5))) < 1e-12
    doomed = choice_model(0.0, 0.0)
    assert np.all(evaluate_policy(doomed, [0, 0, 0])[doomed.decision] == 0.0)


def test_suboptimal_below_optimal():
    kernel = np.zeros((3, 2, 3))
    kernel[1, 0] = [0.2, 0.0, 0.8]
    kernel[1, 1] = [0.5, 0.0, 0.5]
    kernel[2, 0] = [0.0, 0.6, 0.4]
    kernel[2, 1] = [0.1, 0.3, 0.6]
    m = ReachAvoidModel(kernel, [True, False, False], [True, True, False])
    vals = {pol: evaluate_policy(m, [-1, *pol]) for pol in itertools.product(range(2), repeat=2)}
    vstar = value_iteration(m).value
    best = np.max(list(vals.values()), axis=0)
    assert np.allclose(vstar, best, atol=1e-10)
    for v in vals.values():
        assert np.all(v <= vstar + 1e-12)


def test_evaluate_policy_singular_falls_back():
    kernel = np.zeros((4, 2, 4))
    kernel[2, 0, 3] = 1.0  # 2 <-> 3 forever under action 0
    kernel[3, 0, 2] = 1.0
    kernel[2, 1, 0] = 1.0
    kernel[3, 1, 1] = 1.0
    m = ReachAvoidModel(kernel, [True, False, False, False], [True, False, True, True])
    with pytest.warns(RuntimeWarning, match="value undefined by linear solve"):
        v = evaluate_policy(m, [-1, -1, 0, 0])
    assert np.all(v[2:] == 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert evaluate_policy(m, [-1, -1, 1, 0])[2] == 1.0


def test_boundary_form_check():
    m = gambler_ruin(4)
    check_boundary_form(m, ruin(0.5, 4))
    bad = ruin(0.5, 4).copy()
    bad[4] = 0.9
    with pytest.raises(BoundaryFormError):
        check_boundary_form(m, bad)
    bad = ruin(0.5, 4).copy()
    bad[2] = 1.2
    with pytest.raises(BoundaryFormError):
        check_boundary_form(m, bad)


def test_dict_round_trips():
    m = red_and_black(8, 0.45)
    res = value_iteration(m)
    assert np.array_equal(value_from_dict(m, value_to_dict(m, res.value)), res.value)
    assert np.array_equal(policy_from_dict(m, policy_to_dict(m, res.policy)), res.policy)
    with pytest.raises(ValueError, match="no action"):
        policy_from_dict(m, {})
    doc = res.to_dict(m)
    assert doc["converged"] is True and set(doc["policy"]) == {str(i) for i in range(1, 8)}


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_greedy_policy_attains_vstar(seed):
    m = random_model(np.random.default_rng(seed))
    res = value_iteration(m)
    v = linear.solve_hitting(linear.induce_chain(m, res.policy))
    assert np.max(np.abs(v - res.value)) <= 1e-8
