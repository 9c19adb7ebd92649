import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nrsense.config import (
    ConfigError,
    ScenarioConfig,
    dump_flat,
    from_flat,
    json_safe,
    load_config,
    parse_flat,
    parse_value,
    to_flat,
)


def test_parse_values():
    assert parse_value("2") == 2
    assert parse_value("1e-3") == 1e-3
    assert parse_value("-inf") == float("-inf")
    assert parse_value("true") is True
    assert parse_value('"hybrid"') == "hybrid"
    assert parse_value("hybrid") == "hybrid"
    assert parse_value("[0, 0, 25]") == [0, 0, 25]
    assert parse_value("[-inf, 3]") == [float("-inf"), 3]


def test_parse_flat_comments_and_errors():
    flat = parse_flat("# header\nprs.comb_size = 4  # comment\n\nrx.architecture = hybrid\n")
    assert flat == {"prs.comb_size": 4, "rx.architecture": "hybrid"}
    with pytest.raises(ConfigError, match="line 1"):
        parse_flat("prs.comb_size 4")


def test_defaults_round_trip_through_text():
    cfg = ScenarioConfig()
    assert from_flat(parse_flat(dump_flat(cfg))) == cfg


@given(st.sampled_from([2, 4, 6, 12]), st.integers(16, 256), st.floats(-140, -61), st.integers(0, 10**6))
def test_round_trip_with_changes(comb, n_cpi, si, seed):
    cfg = ScenarioConfig().replace(**{
        "prs.comb_size": comb, "prs.n_cpi": n_cpi, "noise.si_power_dbm": si, "scenario.master_seed": seed,
    })
    assert from_flat(parse_flat(dump_flat(cfg))) == cfg
    assert from_flat(json.loads(json.dumps(json_safe(to_flat(cfg))))) == cfg


def test_unknown_key_is_named():
    with pytest.raises(ConfigError, match="prs.bogus"):
        from_flat({"prs.bogus": 1})
    with pytest.raises(ConfigError, match="nosection.x"):
        from_flat({"nosection.x": 1})


def test_type_errors_name_the_key():
    with pytest.raises(ConfigError, match="prs.n_cpi"):
        from_flat({"prs.n_cpi": 1.5})
    with pytest.raises(ConfigError, match="rx.interpolate"):
        from_flat({"rx.interpolate": 3})


def test_invariants():
    with pytest.raises(ConfigError, match="half-wavelength"):
        ScenarioConfig().replace(**{"rx.architecture": "hybrid"})
    ok = ScenarioConfig().replace(**{"rx.architecture": "hybrid", "rx.aoa_method": "bartlett"})
    assert ok.rx.architecture == "hybrid"
    with pytest.raises(ConfigError, match="half-wavelength"):
        ScenarioConfig().replace(**{"array.dv": 0.8})
    with pytest.raises(ConfigError, match="si_power"):
        ScenarioConfig().replace(**{"noise.si_power_dbm": -10.0})
    with pytest.raises(ConfigError):
        ScenarioConfig().replace(**{"scenario.n_drops": 0})


def test_load_config_file_and_manifest(tmp_path):
    path = tmp_path / "a.cfg"
    path.write_text("prs.n_cpi = 64\nscenario.master_seed = 9\n")
    cfg = load_config(path, ["prs.comb_size=4"])
    assert cfg.prs.n_cpi == 64 and cfg.prs.comb_size == 4 and cfg.master_seed == 9
    man = tmp_path / "manifest.json"
    man.write_text(json.dumps({"config": json_safe(to_flat(cfg))}))
    assert load_config(man) == cfg
    with pytest.raises(ConfigError, match="missing.cfg"):
        load_config(tmp_path / "missing.cfg")
    with pytest.raises(ConfigError, match="key=value"):
        load_config(path, ["prs.n_cpi"])
