import json

import numpy as np
import pytest

from hetnoma.config import ConfigError, SimConfig, dbm_to_watts, watts_to_dbm


def test_dbm_conversions():
    assert dbm_to_watts(0.0) == pytest.approx(1e-3)
    assert dbm_to_watts(30.0) == pytest.approx(1.0)
    # 46 dBm macro power ~ 39.81 W
    assert dbm_to_watts(46.0) == pytest.approx(39.8107, rel=1e-4)
    assert watts_to_dbm(1.0) == pytest.approx(30.0)
    for dbm in (-174.0, -90.0, 30.0, 46.0):
        assert watts_to_dbm(dbm_to_watts(dbm)) == pytest.approx(dbm)
    with pytest.raises(ConfigError):
        watts_to_dbm(0.0)


def test_default_linear_properties():
    cfg = SimConfig()
    assert cfg.noise_psd == pytest.approx(10 ** (-17.4) * 1e-3)
    assert cfg.noise_power == pytest.approx(cfg.noise_psd * 20e6)
    assert cfg.p_macro == pytest.approx(39.8107, rel=1e-4)
    assert cfg.p_small == pytest.approx(1.0)
    assert cfg.p_delta == pytest.approx(1e-12)
    assert cfg.ici_power == 0.0


def test_ici_db_over_noise():
    cfg = SimConfig(ici_db_over_noise=20.0)
    assert cfg.ici_power == pytest.approx(100.0 * cfg.noise_power)
    # direct watts path used when the dB knob is unset
    cfg2 = SimConfig(ici_watts=3e-13)
    assert cfg2.ici_power == 3e-13


def test_validation_errors():
    with pytest.raises(ConfigError):
        SimConfig(bias=0.0)
    with pytest.raises(ConfigError):
        SimConfig(bias=1.5)
    with pytest.raises(ConfigError):
        SimConfig(cluster_size=0)
    with pytest.raises(ConfigError):
        SimConfig(cluster_size=9)          # beyond the enumeration cap
    with pytest.raises(ConfigError):
        SimConfig(sic_error=1.5)
    with pytest.raises(ConfigError):
        SimConfig(step_size=0.0)
    with pytest.raises(ConfigError):
        SimConfig(area_width=0.0)
    with pytest.raises(ConfigError):
        SimConfig(ici_watts=-1.0)


def test_dict_roundtrip_and_unknown_fields():
    cfg = SimConfig(n_sbs=3, sic_error=1e-4)
    again = SimConfig.from_dict(cfg.to_dict())
    assert again == cfg
    with pytest.raises(ConfigError):
        SimConfig.from_dict({"n_sbs": 3, "bogus_field": 1})


def test_from_json(tmp_path):
    cfg = SimConfig(n_ues=20, bias=0.7)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert SimConfig.from_json(str(path)) == cfg

    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2, 3]")
    with pytest.raises(ConfigError):
        SimConfig.from_json(str(bad))
    worse = tmp_path / "worse.json"
    worse.write_text("{not json")
    with pytest.raises(ConfigError):
        SimConfig.from_json(str(worse))


def test_replace_and_digest():
    cfg = SimConfig()
    other = cfg.replace(sic_error=1e-3)
    assert other.sic_error == 1e-3 and cfg.sic_error == 1e-5
    assert cfg.digest() == SimConfig().digest()
    assert cfg.digest() != other.digest()
    assert len(cfg.digest()) == 16


def test_packaged_defaults_match_dataclass():
    from hetnoma.cli import DEFAULTS_PATH
    with open(DEFAULTS_PATH) as fh:
        data = json.load(fh)
    assert SimConfig.from_dict(data) == SimConfig()
