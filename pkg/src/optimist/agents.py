"""Optimistic agents for deterministic, finite stochastic and compact classes."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, fields
from typing import Optional, Sequence

import numpy as np

from .core import History, Percept, check_gamma, horizon_for_epsilon
from .environments import (EnvironmentModel, LikelihoodState, ParametricEnvFamily,
                           default_probes, dtilde_horizon, update_log_likelihoods)
from .planning import DEFAULT_NODE_BUDGET, EmptyClassError, Plan, Planner

AGENT_KINDS = ("conservative", "liberal", "stochastic", "compact_radius", "compact_cover")
DISTANCE_TOL = 1e-12


class CoverVerificationError(RuntimeError):
    pass


@dataclass
class HypothesisState:
    """Surviving hypotheses M_t over a fixed enumeration.

    ``considered`` is the set the last optimistic choice ranged over; it
    differs from ``alive`` only for the confidence-radius agent.
    """

    enumeration: tuple[str, ...]
    alive: np.ndarray
    likelihoods: LikelihoodState
    committed: Optional[int] = None
    committed_at: Optional[int] = None
    last_exclusion_t: int = 0
    considered: Optional[np.ndarray] = None

    @classmethod
    def initial(cls, names: Sequence[str], envs: Sequence[EnvironmentModel]) -> "HypothesisState":
        return cls(tuple(names), np.ones(len(envs), dtype=bool), LikelihoodState.initial(envs))

    @property
    def t(self) -> int:
        return self.likelihoods.history_length

    def alive_indices(self) -> list[int]:
        return np.flatnonzero(self.alive).tolist()

    def copy(self) -> "HypothesisState":
        return HypothesisState(self.enumeration, self.alive.copy(), self.likelihoods.copy(),
                               self.committed, self.committed_at, self.last_exclusion_t,
                               None if self.considered is None else self.considered.copy())


def update_consistency(state: HypothesisState, envs: Sequence[EnvironmentModel],
                       h: History) -> HypothesisState:
    """Drop environments that mispredicted the newest step of ``h``."""
    if len(h) != state.t + 1:
        raise ValueError(f"state is at t={state.t}; expected a history of length {state.t + 1}")
    lik = update_log_likelihoods(state.likelihoods, envs, h.parent, h.action, h.percept)
    new = state.copy()
    new.likelihoods = lik
    new.alive = state.alive & (lik.log_likelihoods == 0.0)
    if np.any(new.alive != state.alive):
        new.last_exclusion_t = len(h)
    return new


def log_ratios(log_likelihoods: np.ndarray, reference: Optional[np.ndarray] = None) -> np.ndarray:
    """log nu(h) - max over the reference set of log nu~(h)."""
    ref = log_likelihoods if reference is None else log_likelihoods[reference]
    top = ref.max() if ref.size else -math.inf
    if top == -math.inf:
        return np.full(log_likelihoods.shape, -math.inf)
    return log_likelihoods - top


def update_threshold(state: HypothesisState, z: float, denominator: str = "full") -> HypothesisState:
    """Keep environments of M_{t-1} whose likelihood ratio to the class maximum is >= z.

    ``denominator="full"`` takes the maximum over the original class;
    ``"alive"`` over the survivors M_{t-1}.
    """
    if not 0.0 < z < 1.0:
        raise ValueError(f"threshold z must lie in (0, 1), got {z}")
    ll = state.likelihoods.log_likelihoods
    ref = None if denominator == "full" else state.alive
    if denominator not in ("full", "alive"):
        raise ValueError(f"unknown denominator {denominator!r}")
    ratios = log_ratios(ll, ref)
    new = state.copy()
    new.alive = state.alive & (ratios >= math.log(z))
    if np.any(new.alive != state.alive):
        new.last_exclusion_t = state.t
    return new


def enlarge_by_radius(alive: np.ndarray, r: float, distances: Optional[np.ndarray] = None,
                      members: Optional[Sequence[EnvironmentModel]] = None, H: int = 1) -> np.ndarray:
    """Members within horizon-H distance ``r`` of some alive center."""
    alive = np.asarray(alive, dtype=bool)
    if r <= 0.0:
        return alive.copy()
    if distances is None:
        distances = pairwise_distances(members, H)
    if not alive.any():
        return alive.copy()
    return np.any(distances[alive] <= r + DISTANCE_TOL, axis=0) | alive


def pairwise_distances(members: Sequence[EnvironmentModel], H: int,
                       probe_histories=None, probe_policies=None) -> np.ndarray:
    n = len(members)
    D = np.zeros((n, n))
    if n == 0:
        return D
    if probe_histories is None or probe_policies is None:
        dh, dp = default_probes(members[0].alphabets)
        probe_histories = probe_histories or dh
        probe_policies = probe_policies or dp
    for i in range(n):
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = dtilde_horizon(members[i], members[j], H,
                                               probe_histories, probe_policies)
    return D


# --- confidence radii --------------------------------------------------------

class ConfidenceRadiusProvider:
    """r_t^z as a function of time, history and threshold.

    ``p_complement`` is the declared probability that the true environment
    leaves the enlarged set at some time.
    """

    p_complement: float = 0.0

    def radius_at(self, t: int, h: History, z: float) -> float:
        return self.radius_from_counts(t, visit_counts(h), z)

    def radius_from_counts(self, t: int, counts: dict, z: float) -> float:
        raise NotImplementedError


class ZeroRadius(ConfidenceRadiusProvider):
    def radius_from_counts(self, t, counts, z):
        return 0.0


class ConstantRadius(ConfidenceRadiusProvider):
    def __init__(self, value: float = 1.0):
        self.value = float(value)

    def radius_from_counts(self, t, counts, z):
        return self.value


class HoeffdingRadius(ConfidenceRadiusProvider):
    """Per-(state, action) Hoeffding widths, mapped to a horizon-H TV radius.

    Width for a pair visited n times at time t:
    sqrt(log(2 |S||A| t (t+1) / z) / (2 n)).  The largest width rho over the
    unknown pairs bounds the per-step TV; over H steps the bound is
    1 - (1 - rho)^H.
    """

    def __init__(self, pairs: Sequence[tuple[int, int]], num_states: int, num_actions: int,
                 H: int = 1, z: Optional[float] = None):
        self.pairs = [tuple(p) for p in pairs]
        self.num_states = num_states
        self.num_actions = num_actions
        self.H = H
        self.p_complement = z if z is not None else 0.0

    def width(self, t: int, n: int, z: float) -> float:
        if n <= 0:
            return math.inf
        t = max(t, 1)
        return math.sqrt(math.log(2 * self.num_states * self.num_actions * t * (t + 1) / z) / (2 * n))

    def radius_from_counts(self, t, counts, z):
        if not self.pairs:
            return 0.0
        rho = max(self.width(t, counts.get(p, 0), z) for p in self.pairs)
        if rho >= 1.0:
            return 1.0
        return 1.0 - (1.0 - rho) ** self.H


def visit_counts(h: History) -> dict:
    """Counts of (state, action) where the state is the previous observation (0 at the start)."""
    counts: dict = {}
    obs = 0
    for a, p in h.suffix(0):
        counts[(obs, a)] = counts.get((obs, a), 0) + 1
        obs = p.observation
    return counts


def make_radius_provider(options: Optional[dict], family: Optional[ParametricEnvFamily],
                         z: float, H: int) -> ConfidenceRadiusProvider:
    options = dict(options or {"name": "hoeffding"})
    name = options.get("name", "hoeffding")
    if name == "zero":
        return ZeroRadius()
    if name == "constant":
        return ConstantRadius(options.get("value", 1.0))
    if name == "hoeffding":
        if family is None:
            raise ValueError("hoeffding radius needs a parametric family")
        pairs = options.get("pairs", family.unknown_pairs)
        return HoeffdingRadius(pairs, family.num_states, family.alphabets.num_actions,
                               H=options.get("H", H), z=z)
    raise ValueError(f"unknown radius provider {name!r}")


# --- cover ---------------------------------------------------------------------

@dataclass
class Cover:
    params: list[tuple[float, ...]]
    centers: list[EnvironmentModel]
    radius: float
    max_distance: float
    H: int


def _dist_to(members, envs, H, probes):
    hs, ps = probes
    return np.array([[dtilde_horizon(m, c, H, hs, ps) for c in envs] for m in members])


def build_cover(family: ParametricEnvFamily, epsilon: float, gamma: float, H: int = 1,
                verify_step: Optional[float] = None) -> Cover:
    """Finite set of centers within horizon-H TV radius epsilon*(1-gamma) of every member.

    Centers are an endpoint-inclusive grid with spacing twice the radius;
    coverage is checked on a grid four times finer than the radius and a
    ``CoverVerificationError`` is raised if any sampled member is uncovered.
    """
    check_gamma(gamma)
    radius = epsilon * (1.0 - gamma)
    if radius <= 0:
        raise ValueError("cover radius must be positive")
    if radius >= 1.0:
        params = [tuple((l + u) / 2 for l, u in zip(family.lower, family.upper))]
    else:
        params = family.grid(2.0 * radius)
    centers = [family.instantiate(p) for p in params]
    step = verify_step if verify_step is not None else radius / 4.0
    samples = [family.instantiate(p) for p in family.grid(step)]
    probes = default_probes(family.alphabets)
    nearest = _dist_to(samples, centers, H, probes).min(axis=1)
    worst = int(np.argmax(nearest))
    if nearest[worst] > radius + DISTANCE_TOL:
        raise CoverVerificationError(
            f"member {samples[worst].name} is {nearest[worst]:.6g} from the nearest center "
            f"(radius {radius:.6g})")
    return Cover(params, centers, radius, float(nearest.max()), H)


# --- agents ----------------------------------------------------------------------

@dataclass
class AgentConfig:
    kind: str = "conservative"
    gamma: float = 0.5
    z: float = 0.1
    epsilon_plan: float = 1e-3
    cover_epsilon: Optional[float] = None
    radius: dict = field(default_factory=lambda: {"name": "hoeffding"})
    tie_break: str = "enumeration"
    denominator: str = "full"
    node_budget: int = DEFAULT_NODE_BUDGET

    @classmethod
    def from_dict(cls, d: dict) -> "AgentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown agent field(s): {sorted(unknown)}")
        return cls(**d)

    def validate(self) -> None:
        if self.kind not in AGENT_KINDS:
            raise ValueError(f"agent.kind must be one of {AGENT_KINDS}, got {self.kind!r}")
        check_gamma(self.gamma)
        if not 0.0 < self.z < 1.0:
            raise ValueError(f"agent.z must lie in (0, 1), got {self.z}")
        horizon_for_epsilon(self.epsilon_plan, self.gamma)
        if self.tie_break not in ("enumeration", "reverse"):
            raise ValueError(f"agent.tie_break must be 'enumeration' or 'reverse'")
        if self.denominator not in ("full", "alive"):
            raise ValueError(f"agent.denominator must be 'full' or 'alive'")
        if self.kind == "compact_cover":
            if self.cover_epsilon is None or self.cover_epsilon <= 0:
                raise ValueError("agent.cover_epsilon must be positive for compact_cover")


class OptimisticAgent:
    """Shared machinery: enumeration, planner, likelihood bookkeeping and cloning."""

    kind = ""

    def __init__(self, envs: Sequence[EnvironmentModel], gamma: float, epsilon_plan: float = 1e-3,
                 names: Optional[Sequence[str]] = None, planner: Optional[Planner] = None,
                 reverse_ties: bool = False, node_budget: int = DEFAULT_NODE_BUDGET):
        if not envs:
            raise EmptyClassError("agent needs a non-empty class")
        self.envs = list(envs)
        self.names = list(names) if names is not None else [e.name for e in self.envs]
        self.gamma = check_gamma(gamma)
        self.horizon = horizon_for_epsilon(epsilon_plan, gamma)
        self.planner = planner or Planner(gamma, node_budget)
        self.reverse_ties = reverse_ties
        self.state = HypothesisState.initial(self.names, self.envs)
        self.last_plan: Optional[Plan] = None

    def candidates(self) -> list[int]:
        return self.state.alive_indices()

    def _choose(self, h: History, indices: list[int]) -> Plan:
        if not indices:
            raise EmptyClassError(f"all hypotheses excluded at t={len(h)}")
        return self.planner.optimistic_choice(self.envs, h, self.horizon,
                                              states=self.state.likelihoods.env_states,
                                              indices=indices, reverse=self.reverse_ties)

    def act(self, h: History) -> int:
        raise NotImplementedError

    def observe(self, h: History) -> list[int]:
        """Update on the newest step of ``h``; returns indices excluded by it."""
        raise NotImplementedError

    def clone(self) -> "OptimisticAgent":
        new = copy.copy(self)
        new.state = self.state.copy()
        return new


class ConservativeAgent(OptimisticAgent):
    """Keeps its optimistic hypothesis until that hypothesis is contradicted."""

    kind = "conservative"

    def __init__(self, envs, gamma, epsilon_plan=1e-3, **kw):
        super().__init__(envs, gamma, epsilon_plan, **kw)
        bad = [e.name for e in self.envs if not e.deterministic]
        if bad:
            raise ValueError(f"{self.kind} agent needs deterministic environments; got {bad}")

    def act(self, h: History) -> int:
        st = self.state
        if st.committed is not None and st.alive[st.committed]:
            i = st.committed
            value, tree = self.planner.optimal_value(self.envs[i], h, self.horizon,
                                                     state=st.likelihoods.env_states[i])
            plan = Plan(i, tree.root_action, value, self.horizon, tree)
        else:
            plan = self._choose(h, self.candidates())
            st.committed = plan.env_index
            st.committed_at = len(h)
        self.last_plan = plan
        return plan.root_action

    def observe(self, h: History) -> list[int]:
        before = self.state.alive
        self.state = update_consistency(self.state, self.envs, h)
        return np.flatnonzero(before & ~self.state.alive).tolist()


class LiberalAgent(ConservativeAgent):
    """Re-selects the optimistic pair at every step."""

    kind = "liberal"

    def act(self, h: History) -> int:
        plan = self._choose(h, self.candidates())
        self.state.committed = plan.env_index
        self.state.committed_at = len(h)
        self.last_plan = plan
        return plan.root_action


class StochasticAgent(OptimisticAgent):
    """Optimistic every step; excludes by likelihood ratio to the class maximum."""

    kind = "stochastic"

    def __init__(self, envs, gamma, epsilon_plan=1e-3, z: float = 0.1,
                 denominator: str = "full", **kw):
        super().__init__(envs, gamma, epsilon_plan, **kw)
        if not 0.0 < z < 1.0:
            raise ValueError(f"threshold z must lie in (0, 1), got {z}")
        self.z = z
        self.denominator = denominator

    def act(self, h: History) -> int:
        idx = self.candidates()
        plan = self._choose(h, idx)
        self.state.committed = plan.env_index
        self.last_plan = plan
        return plan.root_action

    def observe(self, h: History) -> list[int]:
        st = self.state
        before = st.alive
        lik = update_log_likelihoods(st.likelihoods, self.envs, h.parent, h.action, h.percept)
        st = st.copy()
        st.likelihoods = lik
        self.state = update_threshold(st, self.z, self.denominator)
        return np.flatnonzero(before & ~self.state.alive).tolist()


class CompactRadiusAgent(StochasticAgent):
    """Threshold exclusion on grid members, then optimism over all members
    within the confidence radius of a survivor."""

    kind = "compact_radius"

    def __init__(self, envs, gamma, epsilon_plan=1e-3, z: float = 0.1,
                 provider: Optional[ConfidenceRadiusProvider] = None,
                 distances: Optional[np.ndarray] = None, H: int = 1, **kw):
        super().__init__(envs, gamma, epsilon_plan, z=z, **kw)
        self.provider = provider or ZeroRadius()
        self.distances = distances if distances is not None else pairwise_distances(self.envs, H)
        self.counts: dict = {}
        self.last_obs = 0
        self.radius = math.inf
        self.radius_trace: list[float] = []

    def current_radius(self, t: int) -> float:
        raw = self.provider.radius_from_counts(t, self.counts, self.z)
        return min(self.radius, raw)

    def candidates(self) -> list[int]:
        return np.flatnonzero(self.state.considered).tolist()

    def act(self, h: History) -> int:
        r = self.current_radius(len(h))
        self.radius = r
        self.radius_trace.append(r)
        self.state.considered = enlarge_by_radius(self.state.alive, r, self.distances)
        return super().act(h)

    def observe(self, h: History) -> list[int]:
        key = (self.last_obs, h.action)
        self.counts[key] = self.counts.get(key, 0) + 1
        self.last_obs = h.percept.observation
        return super().observe(h)

    def clone(self) -> "CompactRadiusAgent":
        new = super().clone()
        new.counts = dict(self.counts)
        new.radius_trace = list(self.radius_trace)
        return new


def make_agent(cfg: AgentConfig, envs: Sequence[EnvironmentModel], names=None,
               family: Optional[ParametricEnvFamily] = None, H: int = 1,
               planner: Optional[Planner] = None, distances=None) -> OptimisticAgent:
    kw = dict(names=names, planner=planner, reverse_ties=cfg.tie_break == "reverse",
              node_budget=cfg.node_budget)
    if cfg.kind == "conservative":
        return ConservativeAgent(envs, cfg.gamma, cfg.epsilon_plan, **kw)
    if cfg.kind == "liberal":
        return LiberalAgent(envs, cfg.gamma, cfg.epsilon_plan, **kw)
    if cfg.kind in ("stochastic", "compact_cover"):
        return StochasticAgent(envs, cfg.gamma, cfg.epsilon_plan, z=cfg.z,
                               denominator=cfg.denominator, **kw)
    if cfg.kind == "compact_radius":
        provider = make_radius_provider(cfg.radius, family, cfg.z, H)
        return CompactRadiusAgent(envs, cfg.gamma, cfg.epsilon_plan, z=cfg.z, provider=provider,
                                  distances=distances, H=H, denominator=cfg.denominator, **kw)
    raise ValueError(f"unknown agent kind {cfg.kind!r}")
