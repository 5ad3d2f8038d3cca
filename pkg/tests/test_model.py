import io
import json
import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import canonical, make_config, single_state
from secrecy_game.model import (
    ChannelLaw,
    ConfigParseError,
    ConfigValidationError,
    GameConfig,
    PowerPolicy,
    StrategyProfile,
    UserConfig,
    config_from_dict,
    config_to_dict,
    dump_config,
    expected_power,
    joint_prob,
    load_config,
    random_profile,
    type_weights,
    uniform_policy,
    validate_config,
    with_snr,
)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_canonical_config_is_valid():
    assert validate_config(canonical()) == []


def test_probabilities_not_summing_to_one_give_one_diagnostic():
    law = ChannelLaw((2.0, 3.5), (0.5, 0.6), (0.2, 0.3), (0.5, 0.5))
    cfg = GameConfig((UserConfig(law, 1.0), UserConfig(ChannelLaw((2.0, 3.5), (0.5, 0.5), (0.2, 0.3), (0.5, 0.5)), 1.0)), 1.0)
    diags = validate_config(cfg)
    assert len(diags) == 1
    assert diags[0].field == "users[0].bob_probs"
    assert diags[0].message == "probabilities sum to 1.1"


def test_average_above_cap_gives_one_diagnostic():
    cfg = canonical()
    users = (replace(cfg.users[0], avg_power=2.0, max_power=1.0), cfg.users[1])
    diags = validate_config(replace(cfg, users=users))
    assert len(diags) == 1
    assert "max_power" in diags[0].message


@pytest.mark.parametrize("field,value", [
    ("bob_states", (3.5, 2.0)),
    ("bob_states", (2.0, 2.0)),
    ("eve_states", (-0.2, 0.3)),
])
def test_bad_gain_lists_are_rejected(field, value):
    cfg = canonical()
    law = replace(cfg.users[0].law, **{field: value})
    cfg = replace(cfg, users=(replace(cfg.users[0], law=law), cfg.users[1]))
    assert [d.field for d in validate_config(cfg)] == [f"users[0].{field}"]


def test_single_user_and_bad_noise_are_rejected():
    cfg = canonical()
    fields = {d.field for d in validate_config(replace(cfg, users=cfg.users[:1], noise_power=0.0))}
    assert fields == {"users", "noise_power"}


def test_oversized_instances_are_rejected():
    cfg = make_config((1.0, 2.0, 3.0, 4.0, 5.0), (0.1, 0.2, 0.3, 0.4, 0.5))
    assert any("at most" in d.message for d in validate_config(cfg))
    cfg = make_config((2.0,), (0.2,), users=4)
    assert any("at most" in d.message for d in validate_config(cfg))


def test_mismatched_state_counts_are_rejected():
    a = canonical().users[0]
    b = single_state().users[0]
    diags = validate_config(GameConfig((a, b), 1.0))
    assert any("share the number of states" in d.message for d in diags)


@pytest.mark.parametrize("alpha,beta,i,j,expected", [
    ((0.5, 0.5), (0.5, 0.5), 0, 1, 0.25),
    ((1.0,), (1.0,), 0, 0, 1.0),
    ((0.3, 0.7), (0.4, 0.6), 1, 0, 0.28),
])
def test_joint_prob(alpha, beta, i, j, expected):
    L = len(alpha)
    law = ChannelLaw(tuple(range(1, L + 1)), alpha, tuple(0.1 * (n + 1) for n in range(L)), beta)
    assert joint_prob(law, i, j) == pytest.approx(expected, abs=1e-15)


def test_joint_prob_index_out_of_range():
    law = canonical().users[0].law
    with pytest.raises(IndexError):
        joint_prob(law, 2, 0)
    with pytest.raises(IndexError):
        joint_prob(law, 0, -1)


@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=4), st.lists(st.floats(0.01, 1.0), min_size=1, max_size=4))
def test_joint_probs_sum_to_one(a, b):
    L = min(len(a), len(b))
    alpha = np.array(a[:L]) / math.fsum(a[:L])
    beta = np.array(b[:L]) / math.fsum(b[:L])
    law = ChannelLaw(tuple(range(1, L + 1)), alpha, tuple(range(1, L + 1)), beta)
    total = math.fsum(joint_prob(law, i, j) for i in range(L) for j in range(L))
    assert abs(total - 1.0) <= 1e-12


def test_uniform_policy_examples():
    cfg = canonical()
    pol = uniform_policy(cfg.users[0])
    np.testing.assert_array_equal(pol.powers, np.ones((2, 2)))
    assert expected_power(cfg.users[0], pol) == 1.0
    five = single_state(avg_power=5.0).users[0]
    np.testing.assert_array_equal(uniform_policy(five).powers, [[5.0]])


def test_uniform_policy_rejects_unreachable_budget():
    user = replace(canonical().users[0], avg_power=2.0, max_power=1.0)
    with pytest.raises(ValueError):
        uniform_policy(user)


@given(st.floats(0.1, 50.0), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_uniform_policy_meets_budget_with_equality(p, a, b):
    law = ChannelLaw((1.0, 2.0), (a, 1 - a), (0.1, 0.2), (b, 1 - b))
    user = UserConfig(law, p)
    assert expected_power(user, uniform_policy(user)) == pytest.approx(p, rel=1e-14)


def test_policies_are_read_only():
    pol = PowerPolicy([[1.0, 2.0], [3.0, 4.0]])
    with pytest.raises(ValueError):
        pol.powers[0, 0] = 5.0
    with pytest.raises(ValueError):
        PowerPolicy([1.0, 2.0])


def test_profile_helpers():
    prof = StrategyProfile([[[1.0, 2.0], [3.0, 4.0]], [[0.0, 0.0], [0.0, 1.0]]])
    assert prof.as_array().shape == (2, 4)
    assert StrategyProfile.from_array(prof.as_array()) == prof
    other = prof.replace(1, PowerPolicy(np.zeros((2, 2))))
    assert prof.distance(other) == 1.0
    assert other[0] == prof[0]


def test_random_profile_spends_budget_exactly(rng):
    cfg = with_snr(canonical(), 3.0)
    for _ in range(20):
        prof = random_profile(cfg, rng)
        for user, pol in zip(cfg.users, prof):
            assert expected_power(user, pol) == pytest.approx(user.avg_power, rel=1e-12)
            assert pol.powers.min() >= 0 and pol.powers.max() <= user.max_power


def test_with_snr_scales_budget_and_cap():
    cfg = with_snr(canonical(), 4.0)
    assert all(u.avg_power == 4.0 and u.max_power == 40.0 for u in cfg.users)
    with pytest.raises(ValueError):
        with_snr(cfg, 0.0)


def test_load_canonical_file():
    cfg = load_config(CONFIGS / "canonical.json")
    assert cfg.n_users == 2 and cfg.n_states == 2
    assert cfg.users[0].law.bob_states == (2.0, 3.5)
    assert cfg.users[0].max_power == 10.0
    assert cfg.tolerances.max_iterations == 10_000


def test_missing_noise_power_is_a_parse_error_naming_the_key():
    doc = json.loads((CONFIGS / "canonical.json").read_text())
    del doc["noise_power"]
    with pytest.raises(ConfigParseError, match="noise_power"):
        load_config(io.StringIO(json.dumps(doc)))


def test_negative_gain_is_a_validation_error():
    doc = json.loads((CONFIGS / "canonical.json").read_text())
    doc["users"][1]["eve_states"] = [-0.2, 0.3]
    with pytest.raises(ConfigValidationError) as err:
        load_config(io.StringIO(json.dumps(doc)))
    assert [d.field for d in err.value.diagnostics] == ["users[1].eve_states"]


@pytest.mark.parametrize("text", ["{", "[]", '{"noise_power": "x", "users": []}',
                                  '{"noise_power": 1, "users": [], "tolerances": {"foo": 1}}'])
def test_malformed_documents(text):
    with pytest.raises(ConfigParseError):
        load_config(io.StringIO(text))


def test_tolerances_are_read():
    doc = json.loads((CONFIGS / "canonical.json").read_text())
    doc["tolerances"] = {"kkt": 1e-9, "max_iterations": 50}
    cfg = config_from_dict(doc)
    assert cfg.tolerances.kkt == 1e-9 and cfg.tolerances.max_iterations == 50
    assert cfg.tolerances.convergence == 1e-8


@given(st.floats(0.1, 10), st.floats(0.1, 5), st.floats(0.01, 0.99))
@settings(max_examples=50)
def test_serialization_round_trip(avg, noise, p):
    law = ChannelLaw((1.0, 2.5), (p, 1 - p), (0.1, 0.3), (0.5, 0.5))
    cfg = GameConfig((UserConfig(law, avg), UserConfig(law, 2 * avg, 30 * avg)), noise)
    assert load_config(io.StringIO(dump_config(cfg))) == cfg
    assert config_from_dict(config_to_dict(cfg)) == cfg


def test_type_weights_shape():
    w = type_weights(canonical().users[0].law)
    assert w.shape == (2, 2) and w.sum() == 1.0
