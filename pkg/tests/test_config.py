import json

import pytest

from litespawn.config import (
    ConfigFileError,
    ConfigInvariantError,
    ConfigSchemaError,
    RunConfig,
    config_from_dict,
    parse_config,
    serialize_config,
)


def test_defaults_are_valid():
    cfg = config_from_dict({})
    assert cfg.model.dims == [8, 8]
    assert cfg.spawn.kind == "gamma" and not cfg.spawn.enabled
    assert cfg.initial_spfs() == [1, 1]
    assert cfg.max_spfs() == [8, 8]
    assert cfg.nsteps == 1000


def test_negative_dt_names_the_field():
    with pytest.raises(ConfigSchemaError, match="dt"):
        config_from_dict({"dt": -1.0})


def test_unknown_keys_are_named():
    with pytest.raises(ConfigSchemaError, match="'dtt'"):
        config_from_dict({"dtt": 1e-3})
    with pytest.raises(ConfigSchemaError, match="spawn.tau"):
        config_from_dict({"spawn": {"tau": 1.0}})


def test_type_errors():
    with pytest.raises(ConfigSchemaError, match="spawn.enabled"):
        config_from_dict({"spawn": {"enabled": 1}})
    with pytest.raises(ConfigSchemaError, match=r"model.dims\[1\]"):
        config_from_dict({"model": {"dims": [8, "8"]}})
    with pytest.raises(ConfigSchemaError, match="spawn.kind"):
        config_from_dict({"spawn": {"kind": "residual"}})


def test_cross_field_invariants():
    with pytest.raises(ConfigInvariantError, match="multiple"):
        config_from_dict({"dt": 0.3, "t_final": 1.0})
    with pytest.raises(ConfigInvariantError, match="initial_state.spfs"):
        config_from_dict({"initial_state": {"spfs": [9, 1]}})
    with pytest.raises(ConfigInvariantError, match="max_m"):
        config_from_dict({"spawn": {"max_m": [2]}})


def test_max_m_scalar_or_list():
    assert config_from_dict({"spawn": {"max_m": 3}}).max_spfs() == [3, 3]
    assert config_from_dict({"spawn": {"max_m": [2, 4]}}).max_spfs() == [2, 4]


def test_roundtrip(tmp_path):
    cfg = config_from_dict({"model": {"dims": [6, 5], "omegas": [1.0, 1.3]}, "spawn": {"enabled": True}})
    path = tmp_path / "c.json"
    path.write_text(serialize_config(cfg))
    back = parse_config(path)
    assert isinstance(back, RunConfig)
    assert back == cfg
    assert serialize_config(back) == serialize_config(cfg)


def test_file_errors(tmp_path):
    with pytest.raises(ConfigFileError):
        parse_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigSchemaError, match="malformed"):
        parse_config(bad)


def test_exit_codes():
    assert ConfigSchemaError.exit_code == 2
    assert ConfigFileError.exit_code == 4
    assert ConfigInvariantError.exit_code == 5
    assert json.loads(serialize_config(config_from_dict({})))["dt"] == 1e-3
