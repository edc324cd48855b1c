import json

import pytest

from wlanmatch.config import (
    ConfigError,
    RunConfig,
    config_from_dict,
    config_to_dict,
    fixture_path,
    load_config,
    load_scenario,
    scenario_from_dict,
    scenario_to_dict,
)


def test_defaults():
    cfg = load_config(None)
    assert cfg == RunConfig()
    assert cfg.control_family == "gaussian"
    assert cfg.sigma == (0.3,)


def test_full_config_round_trip():
    d = {
        "sharing": {"family": "power", "alphas": {"w1": 0.5, "f1": 0.8}},
        "control": {"family": "gaussian", "sigma": [0.2, 0.4], "qhat": [3.0, 4.0]},
        "loadbalance": {"policy": "equal-split"},
        "mac": {"policy": "fixed", "table": "802.11g", "downlink": False, "beta_fixed": None},
        "quota": {"caps": [2, 3]},
    }
    cfg = config_from_dict(d)
    assert cfg.sharing.user_alpha == (0.5,)
    assert cfg.sharing.ap_alpha == (0.8,)
    assert cfg.caps == (2, 3)
    assert config_from_dict(config_to_dict(cfg)) == cfg


@pytest.mark.parametrize("bad", [
    {"colour": "red"},
    {"control": {"family": "gaussian", "width": 1}},
    {"control": {"family": "triangle"}},
    {"mac": {"policy": "fastest"}},
    {"mac": {"policy": "fixed", "table": "802.11ac"}},
    {"loadbalance": {"policy": "greedy"}},
    {"sharing": {"family": "utilitarian"}},
])
def test_bad_configs_rejected(bad):
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_scenario_round_trip():
    sf = load_scenario(fixture_path("campus"))
    again = scenario_from_dict(json.loads(json.dumps(scenario_to_dict(sf.scenario))))
    assert again.scenario.rates == sf.scenario.rates
    assert again.scenario.name == "campus"


def test_scenario_rejects_unknown_and_misnumbered():
    with pytest.raises(ConfigError):
        scenario_from_dict({"users": [{"id": "w1", "x": 0, "y": 0, "z": 1}], "aps": []})
    with pytest.raises(ConfigError):
        scenario_from_dict({"users": [{"id": "w2", "x": 0, "y": 0}], "aps": []})


def test_explicit_rates_fixture():
    sc = load_scenario(fixture_path("three_users_two_aps")).scenario
    assert sc.rates.theta.tolist() == [[300e6, 54e6], [1e6, 54e6], [54e6, 1e6]]


def test_unknown_fixture():
    with pytest.raises(ConfigError):
        fixture_path("nowhere")
