"""Environment classes: JSON class files, builtin classes and random generators.

Class file schema (JSON)::

    {
      "alphabets": {"num_actions": 2, "num_observations": 1, "rewards": [0, 1]},
      "environments": [
        {"name": "nu1", "num_states": 1, "initial_state": 0,
         "transitions": [
           {"state": 0, "action": 0,
            "outcomes": [{"obs": 0, "reward": 1, "prob": 1.0, "next": 0}]},
           ...]}
      ],
      "families": [
        {"family": "bernoulli_bandit", "num_arms": 2, "free_arms": [0],
         "fixed_means": {"1": 0.5}, "grid": {"step": 0.05}}
      ]
    }

Every (state, action) pair needs exactly one transition entry.  Outcomes
omitted from a list have probability 0; ``next`` defaults to the current
state.  Each outcome list must sum to 1 within 1e-12.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .core import Alphabets
from .environments import (NORMALIZATION_TOL, BernoulliBanditFamily, FiniteStateEnv,
                           InvalidDistribution, ParametricEnvFamily)

BUILTIN_CLASSES = ("two_arm", "det4", "bernoulli3", "bernoulli_family")


class ClassFileError(ValueError):
    pass


@dataclass
class FamilySpec:
    family: ParametricEnvFamily
    grid: list[tuple[float, ...]]
    grid_step: Optional[float] = None
    members: list[FiniteStateEnv] = field(default_factory=list)


@dataclass
class EnvironmentClass:
    """An ordered class; enumeration order is file order, explicit environments first."""

    alphabets: Alphabets
    environments: list[FiniteStateEnv]
    families: list[FamilySpec] = field(default_factory=list)
    source: str = ""

    @property
    def members(self) -> list[FiniteStateEnv]:
        out = list(self.environments)
        for fam in self.families:
            out.extend(fam.members)
        return out

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.members]

    def index_of(self, name: str) -> int:
        names = self.names
        if name not in names:
            raise KeyError(f"no environment named {name!r} in class (have {names})")
        return names.index(name)

    def find(self, env: FiniteStateEnv) -> Optional[int]:
        for i, e in enumerate(self.members):
            if e is env or e.same_kernel(env):
                return i
        return None

    @property
    def deterministic(self) -> bool:
        return all(e.deterministic for e in self.members)


def _env_from_dict(d: dict, alph: Alphabets, where: str) -> FiniteStateEnv:
    name = d.get("name", where)
    try:
        S = int(d["num_states"])
        transitions = d["transitions"]
    except KeyError as exc:
        raise ClassFileError(f"environment {name!r}: missing field {exc.args[0]!r}") from None
    A, P = alph.num_actions, alph.num_percepts
    probs = np.zeros((S, A, P))
    nxt = np.zeros((S, A, P), dtype=np.int64)
    for s in range(S):
        nxt[s, :, :] = s
    seen = set()
    for tr in transitions:
        s, a = int(tr["state"]), int(tr["action"])
        if not (0 <= s < S and 0 <= a < A):
            raise ClassFileError(f"environment {name!r}: transition ({s}, {a}) out of range")
        if (s, a) in seen:
            raise ClassFileError(f"environment {name!r}: duplicate transition for state {s}, action {a}")
        seen.add((s, a))
        total = 0.0
        for out in tr["outcomes"]:
            obs = int(out.get("obs", 0))
            if "reward_index" in out:
                ri = int(out["reward_index"])
            else:
                try:
                    ri = alph.reward_index(float(out["reward"]))
                except ValueError as exc:
                    raise ClassFileError(f"environment {name!r}, state {s}: {exc}") from None
            if not (0 <= obs < alph.num_observations and 0 <= ri < alph.num_rewards):
                raise ClassFileError(f"environment {name!r}, state {s}: percept out of range")
            k = obs * alph.num_rewards + ri
            p = float(out.get("prob", 1.0))
            if p < 0:
                raise InvalidDistribution(f"environment {name!r}, state {s}, action {a}: negative probability")
            if probs[s, a, k] > 0:
                raise ClassFileError(f"environment {name!r}, state {s}, action {a}: percept listed twice")
            probs[s, a, k] = p
            nxt[s, a, k] = int(out.get("next", s))
            total += p
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise InvalidDistribution(
                f"environment {name!r}, state {s}, action {a}: probabilities sum to {total!r}, not 1")
    missing = [(s, a) for s in range(S) for a in range(A) if (s, a) not in seen]
    if missing:
        raise ClassFileError(f"environment {name!r}: no transition for (state, action) {missing[0]}")
    if np.any((nxt < 0) | (nxt >= S)):
        raise ClassFileError(f"environment {name!r}: next state out of range")
    return FiniteStateEnv(alph, probs, nxt, int(d.get("initial_state", 0)), name)


def env_from_dict(d: dict, alphabets: Alphabets) -> FiniteStateEnv:
    return _env_from_dict(d, alphabets, d.get("name", "env"))


def env_to_dict(env: FiniteStateEnv) -> dict:
    alph = env.alphabets
    transitions = []
    for s in range(env.num_states):
        for a in range(alph.num_actions):
            outs = []
            for k in range(alph.num_percepts):
                p = float(env.probs[s, a, k])
                if p > 0:
                    obs, ri = divmod(k, alph.num_rewards)
                    outs.append({"obs": obs, "reward": alph.reward_values[ri], "prob": p,
                                 "next": int(env.next_states[s, a, k])})
            transitions.append({"state": s, "action": a, "outcomes": outs})
    return {"name": env.name, "num_states": env.num_states, "initial_state": env.init,
            "transitions": transitions}


def _family_from_dict(d: dict, alph: Alphabets) -> FamilySpec:
    kind = d.get("family")
    if kind != "bernoulli_bandit":
        raise ClassFileError(f"unknown family {kind!r}")
    fam = BernoulliBanditFamily(int(d["num_arms"]), d["free_arms"], d.get("fixed_means", {}),
                                name=d.get("name", "bernoulli_bandit"))
    if fam.alphabets != alph:
        raise ClassFileError(f"family {fam.name!r} alphabets {fam.alphabets} differ from class {alph}")
    grid_d = d.get("grid", {})
    step = None
    if "points" in grid_d:
        grid = [tuple(float(x) for x in p) for p in grid_d["points"]]
    elif "step" in grid_d:
        step = float(grid_d["step"])
        grid = fam.grid(step)
    else:
        grid = []
    for p in grid:
        if not fam.contains(p):
            raise ClassFileError(f"family {fam.name!r}: grid point {p} outside parameter box")
    return FamilySpec(fam, grid, step, [fam.instantiate(p) for p in grid])


def class_from_dict(data: dict, source: str = "") -> EnvironmentClass:
    try:
        a = data["alphabets"]
        alph = Alphabets(int(a["num_actions"]), int(a["num_observations"]),
                         tuple(a.get("rewards", (0.0, 1.0))))
    except (KeyError, TypeError) as exc:
        raise ClassFileError(f"class file needs an 'alphabets' block: {exc}") from None
    envs = [_env_from_dict(e, alph, f"env{i}") for i, e in enumerate(data.get("environments", []))]
    fams = [_family_from_dict(f, alph) for f in data.get("families", [])]
    names = [e.name for e in envs] + [m.name for f in fams for m in f.members]
    if len(set(names)) != len(names):
        raise ClassFileError(f"environment names must be unique: {names}")
    out = EnvironmentClass(alph, envs, fams, source)
    if not out.members and not fams:
        raise ClassFileError("class has no environments")
    return out


def load_class(path) -> EnvironmentClass:
    path = Path(path)
    with path.open() as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as exc:
            raise ClassFileError(f"{path}: invalid JSON: {exc}") from None
    return class_from_dict(data, str(path))


def builtin_class_dict(name: str) -> dict:
    if name not in BUILTIN_CLASSES:
        raise ClassFileError(f"unknown builtin class {name!r} (have {BUILTIN_CLASSES})")
    text = resources.files("optimist").joinpath("data", f"{name}.json").read_text()
    return json.loads(text)


def builtin_class(name: str) -> EnvironmentClass:
    return class_from_dict(builtin_class_dict(name), f"builtin:{name}")


def random_deterministic_class(seed: int, num_envs: int = 4, num_actions: int = 2,
                               num_observations: int = 2, max_states: int = 3,
                               rewards: Sequence[float] = (0.0, 1.0)) -> EnvironmentClass:
    """Random deterministic finite-state machines; reproducible from ``seed``."""
    rng = np.random.default_rng(seed)
    alph = Alphabets(num_actions, num_observations, tuple(rewards))
    envs = []
    for i in range(num_envs):
        S = int(rng.integers(1, max_states + 1))
        probs = np.zeros((S, num_actions, alph.num_percepts))
        nxt = np.zeros(probs.shape, dtype=np.int64)
        for s in range(S):
            for a in range(num_actions):
                k = int(rng.integers(alph.num_percepts))
                probs[s, a, k] = 1.0
                nxt[s, a, :] = s
                nxt[s, a, k] = int(rng.integers(S))
        envs.append(FiniteStateEnv(alph, probs, nxt, 0, f"r{seed}_{i}"))
    return EnvironmentClass(alph, envs, [], f"random_deterministic:{seed}")


def random_stochastic_class(seed: int, num_envs: int = 3, num_actions: int = 2,
                            num_observations: int = 2, max_states: int = 2,
                            rewards: Sequence[float] = (0.0, 1.0)) -> EnvironmentClass:
    """Random stochastic machines with Dirichlet percept rows and percept-driven transitions."""
    rng = np.random.default_rng(seed)
    alph = Alphabets(num_actions, num_observations, tuple(rewards))
    envs = []
    for i in range(num_envs):
        S = int(rng.integers(1, max_states + 1))
        probs = rng.dirichlet(np.ones(alph.num_percepts), size=(S, num_actions))
        nxt = rng.integers(S, size=probs.shape)
        envs.append(FiniteStateEnv(alph, probs, nxt, 0, f"s{seed}_{i}"))
    return EnvironmentClass(alph, envs, [], f"random_stochastic:{seed}")


GENERATORS = {
    "random_deterministic": random_deterministic_class,
    "random_stochastic": random_stochastic_class,
}


def resolve_class(source: Any) -> EnvironmentClass:
    """``builtin:NAME``, a class-file path, an inline class dict, or a generator dict."""
    if isinstance(source, str):
        if source.startswith("builtin:"):
            return builtin_class(source.split(":", 1)[1])
        return load_class(source)
    if isinstance(source, dict):
        if "generator" in source:
            params = dict(source)
            gen = params.pop("generator")
            if gen not in GENERATORS:
                raise ClassFileError(f"unknown class generator {gen!r}")
            return GENERATORS[gen](**params)
        return class_from_dict(source, "inline")
    raise ClassFileError(f"cannot interpret class source {source!r}")
