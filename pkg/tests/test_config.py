import json

import pytest

from skytrust.config import (
    ConfigError,
    ScenarioConfig,
    config_from_dict,
    config_from_json,
    preset,
    preset_names,
)


def test_presets_exist():
    assert preset_names() == ["desk-default", "mesh-dense", "paper-scale", "star-sparse"]


def test_desk_default_shape():
    cfg = preset("desk-default")
    assert (cfg.uav_count, cfg.rogue_count, cfg.user_count) == (20, 4, 40)
    assert cfg.area_side_km == 2.0 and cfg.rounds == 100
    assert cfg.topology == "mesh"


def test_paper_scale_shape():
    cfg = preset("paper-scale")
    assert (cfg.uav_count, cfg.user_count, cfg.area_side_km) == (50, 100, 5.0)


def test_unknown_preset_rejected():
    with pytest.raises(ConfigError):
        preset("desk-defaultt")


def test_unknown_top_level_key_names_path():
    with pytest.raises(ConfigError, match="unknown key: seeed"):
        config_from_dict({"seeed": 3})


def test_unknown_nested_key_names_path():
    with pytest.raises(ConfigError, match="energy.base_drainn"):
        config_from_dict({"energy": {"base_drainn": 1.0}})


def test_rogue_fraction_range_enforced():
    with pytest.raises(ConfigError):
        ScenarioConfig(rogue_fraction=1.0)
    with pytest.raises(ConfigError):
        ScenarioConfig(rogue_fraction=-0.1)


def test_invalid_trust_weights_rejected():
    with pytest.raises(ConfigError, match="trust"):
        config_from_dict({"trust": {"alpha": 0.9, "beta": 0.9, "gamma": 0.9}})


def test_invalid_method_rejected():
    with pytest.raises(ConfigError):
        config_from_dict({"method": "dtsamm"})


def test_json_round_trip_materializes_defaults():
    cfg = preset("desk-default")
    text = cfg.to_json()
    data = json.loads(text)
    assert data["fl"]["epsilon"] == 0.01
    assert data["trust"]["alpha"] == 0.5
    again = config_from_dict(data)
    assert again == cfg


def test_overrides_on_top_of_preset():
    cfg = config_from_json(
        json.dumps({"preset": "desk-default", "seed": 9, "fl": {"aggregation": "fedavg"}})
    )
    assert cfg.seed == 9
    assert cfg.fl.aggregation == "fedavg"
    assert cfg.fl.epsilon == 0.01
    assert cfg.uav_count == 20


def test_invalid_json_rejected():
    with pytest.raises(ConfigError, match="invalid JSON"):
        config_from_json("{not json")
