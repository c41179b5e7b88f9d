import json

import numpy as np
import pytest

from optimist.classes import (BUILTIN_CLASSES, ClassFileError, builtin_class, builtin_class_dict,
                              class_from_dict, env_to_dict, load_class, random_deterministic_class,
                              random_stochastic_class, resolve_class)
from optimist.environments import InvalidDistribution


def _tiny(prob=1.0):
    return {
        "alphabets": {"num_actions": 1, "num_observations": 1, "rewards": [0, 1]},
        "environments": [{"name": "e", "num_states": 1, "transitions": [
            {"state": 0, "action": 0, "outcomes": [{"obs": 0, "reward": 1, "prob": prob}]}]}],
    }


@pytest.mark.parametrize("name", BUILTIN_CLASSES)
def test_builtins_load(name):
    cls = builtin_class(name)
    assert cls.members
    assert len(set(cls.names)) == len(cls.names)


def test_builtin_shapes():
    assert builtin_class("two_arm").names == ["nu1", "nu2"]
    det4 = builtin_class("det4")
    assert len(det4.members) == 4 and det4.deterministic
    assert {e.alphabets.num_actions for e in det4.members} == {2}
    assert {e.alphabets.num_observations for e in det4.members} == {2}
    b3 = builtin_class("bernoulli3")
    assert len(b3.members) == 3 and not b3.deterministic
    fam = builtin_class("bernoulli_family")
    assert len(fam.members) == 21 and fam.families[0].grid_step == 0.05


def test_row_not_summing_to_one_names_env_and_state():
    with pytest.raises(InvalidDistribution, match=r"'e', state 0, action 0"):
        class_from_dict(_tiny(0.9))


def test_missing_and_duplicate_transitions():
    d = _tiny()
    d["alphabets"]["num_actions"] = 2
    with pytest.raises(ClassFileError, match="no transition"):
        class_from_dict(d)
    d = _tiny()
    d["environments"][0]["transitions"].append(d["environments"][0]["transitions"][0])
    with pytest.raises(ClassFileError, match="duplicate"):
        class_from_dict(d)
    d = _tiny()
    d["environments"].append(dict(d["environments"][0]))
    with pytest.raises(ClassFileError, match="unique"):
        class_from_dict(d)


def test_bad_reward_and_alphabets():
    d = _tiny()
    d["environments"][0]["transitions"][0]["outcomes"][0]["reward"] = 0.5
    with pytest.raises(ClassFileError):
        class_from_dict(d)
    with pytest.raises(ClassFileError):
        class_from_dict({"environments": []})


def test_env_round_trip(tmp_path):
    det4 = builtin_class("det4")
    data = {"alphabets": builtin_class_dict("det4")["alphabets"],
            "environments": [env_to_dict(e) for e in det4.members]}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(data))
    again = load_class(path)
    assert again.names == det4.names
    for a, b in zip(again.members, det4.members):
        assert a.same_kernel(b)
    assert det4.find(again.members[2]) == 2


def test_generators_are_reproducible():
    a = random_deterministic_class(7)
    b = random_deterministic_class(7)
    assert all(x.same_kernel(y) for x, y in zip(a.members, b.members))
    assert a.deterministic
    s = random_stochastic_class(3)
    assert not s.deterministic
    assert np.allclose(s.members[0].probs.sum(axis=2), 1.0)


def test_resolve_class_sources(tmp_path):
    assert resolve_class("builtin:two_arm").names == ["nu1", "nu2"]
    assert len(resolve_class({"generator": "random_deterministic", "seed": 1}).members) == 4
    assert resolve_class(_tiny()).names == ["e"]
    with pytest.raises(ClassFileError):
        resolve_class("builtin:nope")
    with pytest.raises(ClassFileError):
        resolve_class({"generator": "nope"})
    with pytest.raises(FileNotFoundError):
        resolve_class(str(tmp_path / "missing.json"))
