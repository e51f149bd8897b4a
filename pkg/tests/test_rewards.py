import io
import json

import numpy as np
import pytest

from reachavoid.bellman import evaluate_policy, value_iteration
from reachavoid.library import exit_or_advance, gambler_ruin, loiter_or_jump, random_model
from reachavoid.linear import induce_chain
from reachavoid.model import ModelFormatError, ReachAvoidModel
from reachavoid.rewards import (
    RewardSpec,
    UnboundedRewardError,
    check_identity_v3,
    evaluate_reward,
    load_reward_spec,
    make_variant,
    reward_spec_from_dict,
    reward_spec_to_dict,
    reward_value_iteration,
)
from reachavoid.simulate import sample_trajectories

RUIN = gambler_ruin(10)
ONE = np.zeros(11, dtype=int)
I = np.arange(11)


def test_variant_tables():
    v3 = make_variant("V3", RUIN).per_stage[:, 0]
    assert v3[10] == 1 and v3[0] == -1 and np.all(v3[1:10] == 0)
    v4 = make_variant("V4", RUIN).per_stage[:, 0]
    assert np.array_equal(v4, (I % 10 != 0).astype(float))
    v1 = make_variant("V1", RUIN, alpha=0.9)
    assert v1.discount == 0.9 and np.array_equal(v1.per_stage[:, 0], (I == 10).astype(float))
    v2 = make_variant("V2", RUIN).per_stage[:, 0]
    assert v2[10] == 1 and np.all(v2[:10] == -1)
    v5 = make_variant("V5", RUIN, gamma=2.0).per_stage[:, 0]
    assert v5[10] == 2 and v5[0] == 0 and np.all(v5[1:10] == -1)


def test_variant_errors():
    with pytest.raises(ValueError, match="gamma >= 1"):
        make_variant("V5", RUIN, gamma=0.5)
    with pytest.raises(ValueError):
        make_variant("V1", RUIN)
    with pytest.raises(ValueError):
        make_variant("V9", RUIN)
    with pytest.raises(ValueError):
        RewardSpec(np.zeros((11, 1)), discount=0.0)


def test_indicator_reward_reproduces_bellman():
    for m in [RUIN, gambler_ruin(10, 0.4), loiter_or_jump(), exit_or_advance()]:
        spec = RewardSpec(np.repeat(m.target[:, None].astype(float), m.n_actions, axis=1))
        a = reward_value_iteration(m, spec)
        b = value_iteration(m)
        assert np.max(np.abs(a.value - b.value)) <= 1e-12
        assert np.array_equal(a.policy, b.policy)


def test_v3_on_ruin():
    res = reward_value_iteration(RUIN, make_variant("V3", RUIN))
    assert np.max(np.abs(res.value - (2 * I / 10 - 1))) <= 1e-9


def test_v4_is_expected_exit_time():
    v4 = evaluate_reward(RUIN, make_variant("V4", RUIN), ONE)
    assert np.allclose(v4, I * (10 - I), atol=1e-9)
    sample = sample_trajectories(RUIN, ONE, "5", 20_000, seed=11)
    T = sample.trajectories.lengths
    assert abs(T.mean() - v4[5]) <= 3 * T.std(ddof=1) / np.sqrt(T.size)


def test_v1_matches_series():
    alpha = 0.9
    v1 = evaluate_reward(RUIN, make_variant("V1", RUIN, alpha=alpha), ONE)
    P = induce_chain(RUIN, ONE).kernel.copy()
    d = RUIN.decision
    # E[α^τ; τ<τ'] = sum_n α^n P(first entry to O at step n)
    # P(first entry at n) = (P_DD^{n-1} P(., O))(x)
    dist = np.eye(11) * d
    series = np.zeros(11)
    for n in range(1, 4000):
        series += alpha**n * (dist @ P[:, 10])
        dist = dist @ (P * d[None, :])
    series[10] = 1.0
    assert np.allclose(v1[d], series[d], atol=1e-12)


def test_identity_v3_cases():
    rep = check_identity_v3(RUIN, ONE, atol=1e-10)
    assert rep["status"] == "pass"
    kernel = np.zeros((3, 2, 3))
    kernel[2, 0, 0] = 1.0
    kernel[2, 1, 1] = 1.0
    m = ReachAvoidModel(kernel, [True, False, False], [True, False, True])
    up = check_identity_v3(m, [-1, -1, 0])
    assert up["status"] == "pass" and up["v3"][2] == 1.0 and up["hit_probability"][2] == 1.0
    down = check_identity_v3(m, [-1, -1, 1])
    assert down["status"] == "pass" and down["v3"][2] == -1.0 and down["hit_probability"][2] == 0.0


def test_identity_v3_skips_nonterminating_policy():
    kernel = np.zeros((4, 2, 4))
    kernel[2, 0, 3] = 1.0
    kernel[3, 0, 2] = 1.0
    kernel[2:, 1, 0] = 1.0
    m = ReachAvoidModel(kernel, [True, False, False, False], [True, False, True, True])
    assert check_identity_v3(m, [-1, -1, 0, 0])["status"] == "skipped"


def test_identity_v3_random(rng):
    for _ in range(10):
        m = random_model(rng)
        rep = check_identity_v3(m, value_iteration(m).policy)
        assert rep["status"] == "pass", rep


def test_signed_reward_needs_termination():
    kernel = np.zeros((4, 2, 4))
    kernel[2, 0, 2] = 1.0
    kernel[2:, 1, 0] = 0.5
    kernel[2:, 1, 1] = 0.5
    kernel[3, 0, 1] = 1.0
    m = ReachAvoidModel(kernel, [True, False, False, False], [True, False, True, True])
    with pytest.raises(ValueError, match="possibly-infinite-horizon"):
        reward_value_iteration(m, make_variant("V3", m))
    with pytest.raises(UnboundedRewardError, match="unbounded total reward"):
        reward_value_iteration(m, make_variant("V4", m), bound=100.0)


def test_boundary_reward_must_not_depend_on_action():
    r = np.zeros((11, 1))
    r2 = np.zeros((3, 2))
    r2[0] = [1.0, 0.0]
    kernel = np.zeros((3, 2, 3))
    kernel[2, :, 0] = 1.0
    m = ReachAvoidModel(kernel, [True, False, False], [True, False, True])
    with pytest.raises(ValueError, match="must not depend"):
        reward_value_iteration(m, RewardSpec(r2))
    with pytest.raises(ValueError, match="shape"):
        reward_value_iteration(m, RewardSpec(r))


def test_translation_changes_policy():
    m = loiter_or_jump(0.9)
    r1 = make_variant("V3", m)
    r2 = r1.shifted(1.0)
    p1 = reward_value_iteration(m, r1).policy
    p2 = reward_value_iteration(m, r2).policy
    assert [m.actions[a] for a in p1[2:]] == ["jump", "jump"]
    assert [m.actions[a] for a in p2[2:]] == ["loiter", "loiter"]


def test_v5_gamma_one_quits_early():
    m = exit_or_advance(0.95)
    hit = value_iteration(m).policy
    assert [m.actions[a] for a in hit[2:]] == ["advance", "advance"]
    low = reward_value_iteration(m, make_variant("V5", m, gamma=1.0))
    # by hand: advance from d1 earns -1 - 1 + 0.95 = -1.05 < -1 for quitting
    assert m.actions[low.policy[2]] == "quit" and m.actions[low.policy[3]] == "advance"
    assert low.value[2] == pytest.approx(-1.0) and low.value[3] == pytest.approx(-0.05)
    high = reward_value_iteration(m, make_variant("V5", m, gamma=3.0))
    assert [m.actions[a] for a in high.policy[2:]] == ["advance", "advance"]


def test_evaluate_reward_matches_iteration(rng):
    for _ in range(10):
        m = random_model(rng)
        spec = make_variant("V2", m)
        res = reward_value_iteration(m, spec)
        assert np.max(np.abs(evaluate_reward(m, spec, res.policy) - res.value)) <= 1e-8


def test_spec_json():
    m = loiter_or_jump()
    spec = make_variant("V3", m, gamma=2.0)
    doc = reward_spec_to_dict(m, spec)
    back = reward_spec_from_dict(m, json.loads(json.dumps(doc)))
    assert np.array_equal(back.per_stage, spec.per_stage) and back.variant == "V3"
    named = load_reward_spec(m, io.StringIO('{"variant": "V1", "alpha": 0.5}'))
    assert named.discount == 0.5
    custom = reward_spec_from_dict(m, {"per_stage": {"goal": 1, "d1": {"loiter": 0.5}}})
    assert custom.per_stage[0, 0] == 1 and custom.per_stage[2, 1] == 0.5 and custom.per_stage[2, 0] == 0
    with pytest.raises(ModelFormatError):
        reward_spec_from_dict(m, {"variant": "V7"})
    with pytest.raises(ModelFormatError):
        reward_spec_from_dict(m, {"per_stage": {"nowhere": 1}})
    with pytest.raises(ModelFormatError, match="line 1"):
        load_reward_spec(m, io.StringIO("{oops"))


def test_hit_probability_from_reward_evaluation():
    m = loiter_or_jump(0.9)
    spec = RewardSpec(np.repeat(m.target[:, None].astype(float), 2, axis=1))
    pol = [-1, -1, 1, 0]
    assert np.allclose(evaluate_reward(m, spec, pol), evaluate_policy(m, pol), atol=1e-14)
