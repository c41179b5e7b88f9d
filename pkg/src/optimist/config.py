"""Experiment configuration: parsing, overrides and validation."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

from .agents import AgentConfig
from .core import horizon_for_epsilon

GAP_WINDOWS = ("all", "final_quarter", "none")

_TOP_FIELDS = {"class", "true_env", "agent", "gamma", "epsilons", "T_max", "runs", "base_seed",
               "rollouts", "gap_window", "tv_horizon", "settle_fraction", "name"}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    class_source: Any
    true_env: Any = 0
    agent: AgentConfig = field(default_factory=AgentConfig)
    epsilons: list = field(default_factory=lambda: [0.1])
    T_max: int = 100
    runs: int = 1
    base_seed: int = 0
    rollouts: int = 256
    gap_window: str = "all"
    tv_horizon: Optional[int] = None
    settle_fraction: float = 0.95
    name: str = ""

    @property
    def gamma(self) -> float:
        return self.agent.gamma

    @property
    def horizon(self) -> int:
        return horizon_for_epsilon(self.agent.epsilon_plan, self.agent.gamma)

    @property
    def H(self) -> int:
        return self.tv_horizon if self.tv_horizon is not None else self.horizon

    def seed_for(self, run_index: int) -> int:
        return self.base_seed + run_index

    def to_dict(self) -> dict:
        d = {
            "class": self.class_source, "true_env": self.true_env, "agent": asdict(self.agent),
            "epsilons": list(self.epsilons), "T_max": self.T_max, "runs": self.runs,
            "base_seed": self.base_seed, "rollouts": self.rollouts, "gap_window": self.gap_window,
            "tv_horizon": self.tv_horizon, "settle_fraction": self.settle_fraction,
            "name": self.name,
        }
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def replace(self, **changes) -> "ExperimentConfig":
        d = self.to_dict()
        for k, v in changes.items():
            set_dotted(d, k, v)
        return config_from_dict(d)


def parse_override(text: str) -> tuple[str, Any]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} must look like KEY=VALUE")
    key, raw = text.split("=", 1)
    key = key.strip()
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def set_dotted(d: dict, key: str, value: Any) -> None:
    parts = key.split(".")
    node = d
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            node[p] = {}
        node = node[p]
    node[parts[-1]] = value


def apply_overrides(raw: dict, overrides: Sequence[str]) -> dict:
    out = copy.deepcopy(raw)
    for o in overrides:
        k, v = parse_override(o)
        set_dotted(out, k, v)
    return out


def _require_int(d, key, minimum):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key} must be an integer, got {v!r}")
    if v < minimum:
        raise ConfigError(f"{key} must be >= {minimum}, got {v}")
    return v


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _TOP_FIELDS
    if unknown:
        raise ConfigError(f"unknown config field(s): {sorted(unknown)}")
    if "class" not in raw:
        raise ConfigError("config field 'class' is required")
    agent_d = dict(raw.get("agent", {}))
    if "gamma" in raw:
        if "gamma" in agent_d and agent_d["gamma"] != raw["gamma"]:
            raise ConfigError(f"gamma {raw['gamma']} conflicts with agent.gamma {agent_d['gamma']}")
        agent_d["gamma"] = raw["gamma"]
    try:
        agent = AgentConfig.from_dict(agent_d)
        agent.validate()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"agent: {exc}") from None
    d = dict(raw)
    defaults = ExperimentConfig(None)
    for key in ("T_max", "runs", "base_seed", "rollouts"):
        d.setdefault(key, getattr(defaults, key))
    T_max = _require_int(d, "T_max", 1)
    runs = _require_int(d, "runs", 1)
    base_seed = _require_int(d, "base_seed", 0)
    rollouts = _require_int(d, "rollouts", 1)
    eps = d.get("epsilons", [0.1])
    if not isinstance(eps, list) or not eps or not all(isinstance(e, (int, float)) and e > 0 for e in eps):
        raise ConfigError(f"epsilons must be a non-empty list of positive numbers, got {eps!r}")
    gw = d.get("gap_window", "all")
    if gw not in GAP_WINDOWS:
        raise ConfigError(f"gap_window must be one of {GAP_WINDOWS}, got {gw!r}")
    H = d.get("tv_horizon")
    if H is not None and (not isinstance(H, int) or H < 0):
        raise ConfigError(f"tv_horizon must be a non-negative integer, got {H!r}")
    sf = d.get("settle_fraction", 0.95)
    if not isinstance(sf, (int, float)) or not 0 <= sf <= 1:
        raise ConfigError(f"settle_fraction must lie in [0, 1], got {sf!r}")
    return ExperimentConfig(
        class_source=d["class"], true_env=d.get("true_env", 0), agent=agent,
        epsilons=[float(e) for e in eps], T_max=T_max, runs=runs, base_seed=base_seed,
        rollouts=rollouts, gap_window=gw, tv_horizon=H, settle_fraction=float(sf),
        name=str(d.get("name", "")))


def load_config(path, overrides: Sequence[str] = (), seed: Optional[int] = None) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    raw = apply_overrides(raw, overrides)
    if seed is not None:
        raw["base_seed"] = seed
    cls = raw.get("class")
    if isinstance(cls, str) and not cls.startswith("builtin:") and not Path(cls).is_absolute():
        raw["class"] = str((path.parent / cls).resolve()) if (path.parent / cls).exists() else cls
    return config_from_dict(raw)
