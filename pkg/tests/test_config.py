import math

import pytest
import yaml

from cfleo.config import ConfigError, SimConfig, from_mapping, load_config


def test_defaults_follow_table():
    c = SimConfig()
    assert (c.altitude_km, c.eta, c.carrier_ghz, c.shadow_std_db) == (550.0, 20.0, 30.0, 5.0)
    assert (c.noise_figure_db, c.nsd_dbm_hz, c.p_max_dbw) == (7.0, -174.0, 15.0)
    assert (c.sat_gain_db, c.ut_gain_db, c.pilot_power_dbw) == (30.0, 5.0, 5.0)
    assert (c.tau_c, c.tau_up, c.num_runs, c.alpha) == (300, 30, 10, 0.5)
    assert c.area_km == 1000.0
    assert c.num_uts > c.tau_up


def test_derived_quantities():
    c = SimConfig()
    assert 10 * math.log10(c.noise_var) == pytest.approx(-123.99, abs=5e-3)
    assert c.p_max_w == pytest.approx(10 ** 1.5)
    assert c.frame.tau_ud == 0 and c.frame.dl_fraction == pytest.approx(0.9)
    assert c.geometry.max_boresight == pytest.approx(math.pi / 3)
    assert c.channel.kappa == pytest.approx(10.0)


@pytest.mark.parametrize("key, value", [("num_saps", 0), ("horizon_slots", 0), ("num_runs", 0),
                                        ("mode", "greedy"), ("alpha", 2.0), ("tau_dd", 400),
                                        ("num_uts", 2.5), ("eta", float("nan"))])
def test_key_level_errors(key, value):
    with pytest.raises(ConfigError, match=key):
        SimConfig(**{key: value})


def test_unknown_and_nested_keys():
    with pytest.raises(ConfigError, match="bogus"):
        from_mapping({"bogus": 1})
    with pytest.raises(ConfigError, match="nested"):
        from_mapping({"alpha": {"a": 1}})
    with pytest.raises(ConfigError):
        from_mapping([1, 2])


def test_yaml_roundtrip(tmp_path):
    c = SimConfig(num_saps=16, seed=7, mode="best_channel", r_min_bps_hz=0.2)
    path = tmp_path / "c.yaml"
    path.write_text(c.dump())
    assert load_config(path) == c


def test_ints_widen_for_float_keys(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump({"altitude_km": 600, "num_saps": 4}))
    c = load_config(path)
    assert c.altitude_km == 600.0 and isinstance(c.altitude_km, float)


def test_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("")
    assert load_config(path) == SimConfig()


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.yaml")


def test_overrides_skip_none():
    c = SimConfig().with_overrides(mode=None, seed=3)
    assert c.seed == 3 and c.mode == "cf_jpahm"
