import json

import pytest

from optimist.config import ConfigError, apply_overrides, config_from_dict, load_config, parse_override


BASE = {"class": "builtin:two_arm", "agent": {"kind": "conservative"}}


def test_defaults_and_derived_fields():
    c = config_from_dict(BASE)
    assert c.T_max == 100 and c.runs == 1 and c.gamma == 0.5
    assert c.horizon == 11 and c.H == 11
    assert c.seed_for(3) == 3
    assert config_from_dict({**BASE, "base_seed": 10}).seed_for(2) == 12


def test_gamma_merging():
    assert config_from_dict({**BASE, "gamma": 0.9}).agent.gamma == 0.9
    with pytest.raises(ConfigError, match="conflicts"):
        config_from_dict({**BASE, "gamma": 0.9, "agent": {"gamma": 0.5}})


@pytest.mark.parametrize("field,value", [("T_max", 0), ("runs", 0), ("runs", 1.5), ("epsilons", []),
                                         ("epsilons", [-1]), ("gap_window", "some"),
                                         ("settle_fraction", 2), ("tv_horizon", -1)])
def test_invalid_fields_are_named(field, value):
    with pytest.raises(ConfigError, match=field):
        config_from_dict({**BASE, field: value})


def test_unknown_fields_rejected():
    with pytest.raises(ConfigError, match="unknown"):
        config_from_dict({**BASE, "Tmax": 3})
    with pytest.raises(ConfigError, match="agent"):
        config_from_dict({**BASE, "agent": {"kind": "conservative", "zz": 1}})
    with pytest.raises(ConfigError, match="class"):
        config_from_dict({"agent": {}})


def test_overrides():
    assert parse_override("T_max=5") == ("T_max", 5)
    assert parse_override("agent.kind=liberal") == ("agent.kind", "liberal")
    assert parse_override("epsilons=[0.1,0.2]") == ("epsilons", [0.1, 0.2])
    with pytest.raises(ConfigError):
        parse_override("T_max")
    out = apply_overrides(BASE, ["agent.z=0.2", "T_max=3"])
    assert out["agent"]["z"] == 0.2 and out["T_max"] == 3 and "T_max" not in BASE


def test_load_config_applies_overrides_before_validation(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(BASE))
    c = load_config(p, ["T_max=7"], seed=4)
    assert c.T_max == 7 and c.base_seed == 4
    with pytest.raises(ConfigError, match="T_max"):
        load_config(p, ["T_max=0"])
    p.write_text(json.dumps({**BASE, "T_max": 0}))
    with pytest.raises(ConfigError, match="T_max"):
        load_config(p)
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "none.json")


def test_relative_class_path_resolves_against_config(tmp_path):
    (tmp_path / "cls.json").write_text("{}")
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"class": "cls.json"}))
    assert load_config(p).class_source == str((tmp_path / "cls.json").resolve())


def test_digest_is_stable_and_sensitive():
    a = config_from_dict(BASE)
    assert a.digest() == config_from_dict(BASE).digest()
    assert a.digest() != a.replace(T_max=5).digest()
    assert a.replace(**{"agent.kind": "liberal"}).agent.kind == "liberal"
