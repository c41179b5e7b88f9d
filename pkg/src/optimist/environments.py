"""History-based environments, likelihoods, consistency and total variation.

Every environment is presented as a machine whose internal state is a
function of the history: ``next_state(state, action, percept)`` is total.
``FiniteStateEnv`` is the tabular case used throughout the experiments;
``KernelEnv`` wraps an arbitrary ``(history, action) -> distribution`` kernel
by using the history itself as the state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Optional, Sequence

import numpy as np

from .core import Alphabets, History, Percept
from .policies import ConstantPolicy, Policy

NORMALIZATION_TOL = 1e-12
TV_TREE_GUARD = 10 ** 6


class InvalidDistribution(ValueError):
    pass


class EnvironmentModel:
    """Conditional percept distribution nu(o, r | h, a)."""

    alphabets: Alphabets
    name: str = ""
    deterministic: bool = False

    def initial_state(self) -> Hashable:
        raise NotImplementedError

    def percept_probs(self, state, action: int) -> np.ndarray:
        raise NotImplementedError

    def next_state(self, state, action: int, percept: int):
        raise NotImplementedError

    def state_after(self, h: History):
        s = self.initial_state()
        nr = self.alphabets.num_rewards
        for a, p in h.suffix(0):
            s = self.next_state(s, a, p.observation * nr + p.reward_index)
        return s


class FiniteStateEnv(EnvironmentModel):
    """Tabular environment.

    ``probs[s, a, p]`` is the probability of flattened percept ``p`` after
    action ``a`` in internal state ``s``; ``next_states[s, a, p]`` is the state
    the machine moves to when that percept occurs.  Rows are renormalized
    here, once.
    """

    tabular = True

    def __init__(self, alphabets: Alphabets, probs, next_states, initial_state: int = 0,
                 name: str = ""):
        probs = np.array(probs, dtype=float)
        next_states = np.array(next_states, dtype=np.int64)
        S = probs.shape[0]
        expected = (S, alphabets.num_actions, alphabets.num_percepts)
        if probs.shape != expected or next_states.shape != expected:
            raise ValueError(f"{name or 'environment'}: tables must have shape {expected}, "
                             f"got {probs.shape} and {next_states.shape}")
        if S < 1:
            raise ValueError("num_states must be >= 1")
        if not 0 <= initial_state < S:
            raise ValueError(f"{name}: initial_state {initial_state} out of range")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise InvalidDistribution(f"{name}: negative or non-finite probability")
        sums = probs.sum(axis=2)
        if np.any(sums <= 0):
            s, a = np.argwhere(sums <= 0)[0]
            raise InvalidDistribution(f"{name}: empty distribution at state {s}, action {a}")
        if np.any((next_states < 0) | (next_states >= S)):
            raise ValueError(f"{name}: next state index out of range")
        self.alphabets = alphabets
        self.name = name
        self.num_states = S
        self.init = int(initial_state)
        self.probs = probs / sums[:, :, None]
        self.probs.setflags(write=False)
        self.next_states = next_states
        self.next_states.setflags(write=False)
        with np.errstate(divide="ignore"):
            self.log_probs = np.log(self.probs)
        self.log_probs.setflags(write=False)
        self.deterministic = bool(np.all((self.probs == 0.0) | (self.probs == 1.0)))
        self.rewards = np.array([alphabets.reward_of(p) for p in range(alphabets.num_percepts)])
        # python-level copies for the scalar hot paths
        self._next = self.next_states.tolist()
        self._logp = self.log_probs.tolist()

    def initial_state(self) -> int:
        return self.init

    def percept_probs(self, state: int, action: int) -> np.ndarray:
        return self.probs[state, action]

    def next_state(self, state: int, action: int, percept: int) -> int:
        return self._next[state][action][percept]

    def log_prob(self, state: int, action: int, percept: int) -> float:
        return self._logp[state][action][percept]

    def same_kernel(self, other: "EnvironmentModel") -> bool:
        """Structural equality of the tabular machines (no state relabeling)."""
        return (isinstance(other, FiniteStateEnv)
                and other.alphabets == self.alphabets
                and other.init == self.init
                and other.probs.shape == self.probs.shape
                and np.array_equal(other.probs, self.probs)
                and np.array_equal(other.next_states, self.next_states))

    def __repr__(self) -> str:
        kind = "det" if self.deterministic else "stoch"
        return f"FiniteStateEnv({self.name!r}, states={self.num_states}, {kind})"


class KernelEnv(EnvironmentModel):
    """Fully history-dependent environment given by a kernel function.

    The kernel must return a normalized vector over flattened percepts; it is
    not renormalized per query.
    """

    tabular = False

    def __init__(self, alphabets: Alphabets, kernel: Callable[[History, int], Sequence[float]],
                 deterministic: bool = False, name: str = ""):
        self.alphabets = alphabets
        self.kernel = kernel
        self.deterministic = deterministic
        self.name = name

    def initial_state(self) -> History:
        return History.empty()

    def percept_probs(self, state: History, action: int) -> np.ndarray:
        return np.asarray(self.kernel(state, action), dtype=float)

    def next_state(self, state: History, action: int, percept: int) -> History:
        return state.append(action, self.alphabets.percept_at(percept))

    def state_after(self, h: History) -> History:
        return h

    def log_prob(self, state, action, percept) -> float:
        p = self.percept_probs(state, action)[percept]
        return math.log(p) if p > 0 else -math.inf


def percept_distribution(env: EnvironmentModel, h: History, action: int) -> np.ndarray:
    env.alphabets.check_action(action)
    return env.percept_probs(env.state_after(h), action)


def sample_index(probs: np.ndarray, u: float) -> int:
    """Inverse-CDF draw of a percept index from a uniform ``u`` in [0, 1)."""
    acc = 0.0
    last = 0
    for k, p in enumerate(probs):
        if p > 0.0:
            acc += p
            last = k
            if u < acc:
                return k
    return last


def sample_percept(env: EnvironmentModel, h: History, action: int,
                   rng: np.random.Generator) -> Percept:
    probs = percept_distribution(env, h, action)
    return env.alphabets.percept_at(sample_index(probs, rng.random()))


def is_consistent(env: EnvironmentModel, h: History) -> bool:
    """Replay ``h``'s actions through a deterministic ``env`` and compare percepts."""
    if not env.deterministic:
        raise ValueError(f"consistency is only defined for deterministic environments "
                         f"({env.name!r} is stochastic)")
    s = env.initial_state()
    nr = env.alphabets.num_rewards
    for a, p in h.suffix(0):
        k = p.observation * nr + p.reward_index
        if env.percept_probs(s, a)[k] != 1.0:
            return False
        s = env.next_state(s, a, k)
    return True


@dataclass
class LikelihoodState:
    """Per-environment log nu(h_t | a_1:t) plus each machine's current state."""

    log_likelihoods: np.ndarray
    history_length: int = 0
    env_states: list = field(default_factory=list)

    @classmethod
    def initial(cls, envs: Sequence[EnvironmentModel]) -> "LikelihoodState":
        return cls(np.zeros(len(envs)), 0, [e.initial_state() for e in envs])

    def copy(self) -> "LikelihoodState":
        return LikelihoodState(self.log_likelihoods.copy(), self.history_length,
                               list(self.env_states))


def update_log_likelihoods(state: LikelihoodState, envs: Sequence[EnvironmentModel],
                           h_prev: History, action: int, percept: Percept) -> LikelihoodState:
    if state.history_length != len(h_prev):
        raise ValueError(f"likelihood state is at t={state.history_length}, "
                         f"history has length {len(h_prev)}")
    if not state.env_states:
        state = LikelihoodState(state.log_likelihoods,
                                state.history_length,
                                [e.state_after(h_prev) for e in envs])
    k = envs[0].alphabets.percept_index(percept) if envs else 0
    ll = state.log_likelihoods.copy()
    new_states = []
    for i, (env, s) in enumerate(zip(envs, state.env_states)):
        ll[i] += env.log_prob(s, action, k)
        new_states.append(env.next_state(s, action, k))
    return LikelihoodState(ll, state.history_length + 1, new_states)


def tv_distance_horizon(env1: EnvironmentModel, env2: EnvironmentModel, h: History,
                        policy: Policy, H: int, guard: int = TV_TREE_GUARD) -> float:
    """Total variation between the laws of the next ``H`` percepts under ``policy``."""
    if H < 0:
        raise ValueError("H must be >= 0")
    n = env1.alphabets.num_percepts
    if n ** H > guard:
        raise ValueError(f"outcome tree |O*R|^H = {n}^{H} exceeds guard {guard}")
    if H == 0:
        return 0.0
    at = env1.alphabets.percept_at

    def rec(hist, s1, s2, p, q, d):
        a = policy.act(hist)
        P = env1.percept_probs(s1, a)
        Q = env2.percept_probs(s2, a)
        total = 0.0
        for k in range(n):
            pk = p * P[k]
            qk = q * Q[k]
            if pk == 0.0 and qk == 0.0:
                continue
            if d == 1 or pk == 0.0 or qk == 0.0:
                total += abs(pk - qk)
            else:
                total += rec(hist.append(a, at(k)), env1.next_state(s1, a, k),
                             env2.next_state(s2, a, k), pk, qk, d - 1)
        return total

    val = 0.5 * rec(h, env1.state_after(h), env2.state_after(h), 1.0, 1.0, H)
    return min(max(val, 0.0), 1.0)


def default_probes(alphabets: Alphabets) -> tuple[list[History], list[Policy]]:
    return [History.empty()], [ConstantPolicy(a) for a in range(alphabets.num_actions)]


def dtilde_horizon(env1: EnvironmentModel, env2: EnvironmentModel, H: int,
                   probe_histories: Optional[Sequence[History]] = None,
                   probe_policies: Optional[Sequence[Policy]] = None) -> float:
    """Max of horizon-H total variation over the supplied probe histories and policies."""
    dh, dp = default_probes(env1.alphabets)
    hs = dh if probe_histories is None else list(probe_histories)
    ps = dp if probe_policies is None else list(probe_policies)
    if not hs or not ps:
        raise ValueError("probe sets must be non-empty")
    return max(tv_distance_horizon(env1, env2, h, pi, H) for h in hs for pi in ps)


class ParametricEnvFamily:
    """Compact box of parameters with an instantiation map.

    ``unknown_pairs`` lists the (state, action) pairs whose percept law depends
    on the parameter; confidence radii are built per pair.
    """

    def __init__(self, name: str, lower: Sequence[float], upper: Sequence[float],
                 build: Callable[[tuple], FiniteStateEnv], unknown_pairs=(), num_states: int = 1,
                 alphabets: Optional[Alphabets] = None):
        self.name = name
        self.lower = tuple(float(x) for x in lower)
        self.upper = tuple(float(x) for x in upper)
        if len(self.lower) != len(self.upper) or any(u < l for l, u in zip(self.lower, self.upper)):
            raise ValueError(f"{name}: bad parameter box {self.lower}..{self.upper}")
        self._build = build
        self.unknown_pairs = tuple(unknown_pairs)
        self.num_states = num_states
        self.alphabets = alphabets

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains(self, theta: Sequence[float]) -> bool:
        return len(theta) == self.dim and all(
            l - 1e-12 <= x <= u + 1e-12 for x, l, u in zip(theta, self.lower, self.upper))

    def instantiate(self, theta: Sequence[float]) -> FiniteStateEnv:
        theta = tuple(float(x) for x in theta)
        if not self.contains(theta):
            raise ValueError(f"{self.name}: parameter {theta} outside box")
        return self._build(theta)

    def grid(self, step: float) -> list[tuple[float, ...]]:
        """Endpoint-inclusive product grid with spacing at most ``step`` per axis."""
        axes = []
        for l, u in zip(self.lower, self.upper):
            if u == l:
                axes.append([l])
                continue
            n = int(math.ceil((u - l) / step - 1e-9)) + 1
            axes.append([round(float(x), 12) for x in np.linspace(l, u, n)])
        return [tuple(p) for p in _product(axes)]


def _product(axes):
    if not axes:
        yield ()
        return
    for x in axes[0]:
        for rest in _product(axes[1:]):
            yield (x,) + rest


def bernoulli_bandit(means: Sequence[float], name: str = "") -> FiniteStateEnv:
    """Single-state bandit; arm ``a`` pays reward 1 with probability ``means[a]``."""
    alph = Alphabets(len(means), 1, (0.0, 1.0))
    probs = np.array([[[1.0 - m, m] for m in means]])
    nxt = np.zeros(probs.shape, dtype=np.int64)
    return FiniteStateEnv(alph, probs, nxt, 0, name or f"bandit{tuple(means)}")


class BernoulliBanditFamily(ParametricEnvFamily):
    """Bandits whose ``free_arms`` have unknown means in [0, 1]; other arms are fixed."""

    def __init__(self, num_arms: int, free_arms: Sequence[int], fixed_means: dict,
                 name: str = "bernoulli_bandit"):
        free = tuple(int(a) for a in free_arms)
        fixed = {int(k): float(v) for k, v in fixed_means.items()}
        if set(free) & set(fixed) or set(free) | set(fixed) != set(range(num_arms)):
            raise ValueError("every arm must be either free or fixed, not both")
        self.num_arms = num_arms
        self.free_arms = free
        self.fixed_means = fixed

        def build(theta):
            means = [0.0] * num_arms
            for a, v in fixed.items():
                means[a] = v
            for a, v in zip(free, theta):
                means[a] = v
            label = ",".join(f"{v:g}" for v in theta)
            return bernoulli_bandit(means, name=f"{name}[{label}]")

        super().__init__(name, [0.0] * len(free), [1.0] * len(free), build,
                         unknown_pairs=[(0, a) for a in free], num_states=1,
                         alphabets=Alphabets(num_arms, 1, (0.0, 1.0)))
