import numpy as np
import pytest

from reachavoid.bellman import value_iteration
from reachavoid.library import gambler_ruin, random_model, red_and_black
from reachavoid.linear import (
    SingularChainError,
    chain_from_matrix,
    expected_exit_time,
    induce_chain,
    solve_hitting,
)
from reachavoid.model import ReachAvoidModel


def test_ruin_exact():
    chain = induce_chain(gambler_ruin(10), np.zeros(11, dtype=int))
    v = solve_hitting(chain)
    assert np.max(np.abs(v - np.arange(11) / 10)) <= 1e-12
    assert np.max(np.abs(solve_hitting(chain, "cemetery") - (1 - np.arange(11) / 10))) <= 1e-12


def test_single_step_absorption():
    P = np.zeros((5, 5))
    P[2:, 0] = 0.3
    P[2:, 1] = 0.7
    chain = chain_from_matrix(P, [True, False, False, False, False], [True, False, True, True, True])
    v = solve_hitting(chain)
    assert np.allclose(v[2:], 0.3, atol=1e-15)


def test_induced_chain_rows():
    m = red_and_black(10, 0.4)
    bold = value_iteration(m).policy
    ones = np.where(m.decision, 0, -1)
    c1 = induce_chain(m, bold)
    c2 = induce_chain(m, ones)
    for x in np.flatnonzero(m.decision):
        assert np.array_equal(c2.kernel[x], m.kernel[x, 0])
    diff = np.flatnonzero(np.any(c1.kernel != c2.kernel, axis=1))
    assert set(diff) == {x for x in np.flatnonzero(m.decision) if bold[x] != 0}
    assert c1.kernel[0, 0] == 1.0 and c1.kernel[10, 10] == 1.0


def test_single_action_chain_equals_kernel():
    m = gambler_ruin(6, 0.3)
    c = induce_chain(m, np.zeros(7, dtype=int))
    d = m.decision
    assert np.array_equal(c.kernel[d], m.kernel[d, 0])


def test_one_policy_change_one_row():
    m = red_and_black(10, 0.4)
    a = np.where(m.decision, 0, -1)
    b = a.copy()
    b[5] = 4
    rows = np.flatnonzero(np.any(induce_chain(m, a).kernel != induce_chain(m, b).kernel, axis=1))
    assert list(rows) == [5]


def test_random_chain_matches_value_iteration(rng):
    for _ in range(5):
        m = random_model(rng, n_states=8, n_actions=1)
        v = solve_hitting(induce_chain(m, np.where(m.decision, 0, -1)))
        assert np.max(np.abs(v - value_iteration(m).value)) <= 1e-8


def test_closed_class_is_singular():
    P = np.zeros((4, 4))
    P[2, 3] = 1.0
    P[3, 2] = 1.0
    chain = chain_from_matrix(P, [True, False, False, False], [True, False, True, True])
    with pytest.raises(SingularChainError, match="closed class"):
        solve_hitting(chain)


def test_bad_policy_rejected():
    m = red_and_black(10, 0.4)
    pol = np.where(m.decision, 0, -1)
    pol[1] = 3  # stake 4 with fortune 1
    with pytest.raises(ValueError, match="infeasible"):
        induce_chain(m, pol)
    with pytest.raises(ValueError):
        induce_chain(m, np.full(11, -1))


def test_expected_exit_time_ruin():
    chain = induce_chain(gambler_ruin(10), np.zeros(11, dtype=int))
    i = np.arange(11)
    assert np.allclose(expected_exit_time(chain), i * (10 - i), atol=1e-9)


def test_rows_must_be_stochastic():
    with pytest.raises(ValueError):
        chain_from_matrix(np.full((3, 3), 0.5), [True, False, False], [True, False, True])


def test_two_state_direct():
    kernel = np.zeros((2, 1, 2))
    kernel[1, 0] = [0.25, 0.75]
    m = ReachAvoidModel(kernel, [True, False], [True, True])
    # no cemetery, but the self-loop leaks to the target, so the solve succeeds
    assert solve_hitting(induce_chain(m, [-1, 0]))[1] == pytest.approx(1.0)
