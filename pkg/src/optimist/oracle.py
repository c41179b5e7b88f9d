"""Value of the running agent itself, measured by cloning it and rolling forward."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .agents import ConservativeAgent, OptimisticAgent, StochasticAgent
from .core import History
from .environments import EnvironmentModel, sample_index
from .planning import VALUE_TIE_TOL, EmptyClassError, Planner
from .policies import ActionTree


@dataclass(frozen=True)
class GapEstimate:
    v_opt: float
    v_agent: float
    se: float
    rollouts: int

    @property
    def gap(self) -> float:
        return self.v_opt - self.v_agent


def rollout_return(agent: OptimisticAgent, env: EnvironmentModel, h: History, state, ell: int,
                   uniforms: Sequence[float]) -> float:
    """Discounted ``ell``-step return of ``agent`` (mutated) acting in ``env`` from ``h``.

    Percepts are drawn by inverse CDF from ``uniforms``.  A rollout whose
    class empties stops earning.
    """
    g = agent.gamma
    alph = env.alphabets
    total, w = 0.0, 1.0
    for k in range(ell):
        try:
            a = agent.act(h)
        except EmptyClassError:
            break
        p = sample_index(env.percept_probs(state, a), uniforms[k])
        total += w * alph.reward_of(p)
        w *= g
        h = h.append(a, alph.percept_at(p))
        state = env.next_state(state, a, p)
        agent.observe(h)
    return total


def _vectorizable(agent: OptimisticAgent, env: EnvironmentModel) -> bool:
    return (type(agent) is StochasticAgent and getattr(env, "tabular", False)
            and all(getattr(e, "tabular", False) for e in agent.envs))


class _StackedClass:
    """Per-environment tables padded to a common state count for batched indexing."""

    def __init__(self, envs, planner: Planner, ell: int):
        M = len(envs)
        S = max(e.num_states for e in envs)
        A, P = envs[0].probs.shape[1:]
        self.values = np.full((M, S), -np.inf)
        self.actions = np.zeros((M, S), dtype=np.int64)
        self.log_probs = np.full((M, S, A, P), -np.inf)
        self.next_states = np.zeros((M, S, A, P), dtype=np.int64)
        for i, e in enumerate(envs):
            tab = planner._table(e, ell)
            n = e.num_states
            self.values[i, :n] = tab.values[ell]
            self.actions[i, :n] = tab.actions[ell]
            self.log_probs[i, :n] = e.log_probs
            self.next_states[i, :n] = e.next_states


def _stacked(agent, ell: int) -> _StackedClass:
    # entries keep their environments alive, so ids in the key stay unique
    cache = agent.planner.__dict__.setdefault("_stacks", {})
    key = (tuple(id(e) for e in agent.envs), ell)
    hit = cache.get(key)
    if hit is None:
        hit = cache[key] = (_StackedClass(agent.envs, agent.planner, ell), list(agent.envs))
    return hit[0]


def _cdf(env) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative percept probabilities and the last positive-probability index per row."""
    c = env.__dict__.get("_cdf")
    if c is None:
        P = env.probs.shape[2]
        pos = env.probs > 0
        last = (P - 1 - np.argmax(pos[..., ::-1], axis=2)).astype(np.int64)
        c = env.__dict__["_cdf"] = (np.cumsum(env.probs, axis=2), last)
    return c


def batched_rollouts(agent: StochasticAgent, env, starts: Sequence[tuple], ell: int,
                     uniforms: np.ndarray) -> np.ndarray:
    """Returns of copies of a threshold agent started from several snapshots at once.

    ``starts`` holds (HypothesisState, true-environment state) pairs; row
    block ``j`` of ``uniforms`` (equal blocks) drives copies of start ``j``.
    Same arithmetic as stepping clones with ``rollout_return``; every
    environment must be tabular.  Arrays are environment-major, (M, B).
    """
    B = uniforms.shape[0]
    n = len(starts)
    if n == 0 or B % n:
        raise ValueError("uniform rows must split evenly over the starts")
    R = B // n
    M = len(agent.envs)
    tab = _stacked(agent, ell)
    cdf, last = _cdf(env)
    ll = np.repeat(np.stack([s.likelihoods.log_likelihoods for s, _ in starts], axis=1), R, axis=1)
    alive = np.repeat(np.stack([s.alive for s, _ in starts], axis=1), R, axis=1)
    states = np.repeat(np.array([s.likelihoods.env_states for s, _ in starts],
                                dtype=np.int64).T.reshape(M, n), R, axis=1)
    smu = np.repeat(np.array([x for _, x in starts], dtype=np.int64), R)
    running = np.ones(B, dtype=bool)
    total = np.zeros(B)
    cols = np.arange(B)
    rows = np.arange(M)[:, None]
    log_z = math.log(agent.z)
    full = agent.denominator == "full"
    U = np.ascontiguousarray(uniforms.T)
    w = 1.0
    with np.errstate(invalid="ignore"):
        for k in range(ell):
            vals = np.where(alive, tab.values[rows, states], -np.inf)
            top = vals.max(axis=0)
            live = top > -np.inf
            if not live.all():
                running &= live
                if not running.any():
                    break
            ok = vals >= top - VALUE_TIE_TOL
            if agent.reverse_ties:
                chosen = M - 1 - np.argmax(ok[::-1], axis=0)
            else:
                chosen = np.argmax(ok, axis=0)
            acts = tab.actions[chosen, states[chosen, cols]]
            pidx = (cdf[smu, acts] <= U[k][:, None]).sum(axis=1)
            np.minimum(pidx, last[smu, acts], out=pidx)
            r = env.rewards[pidx]
            if running.all():
                total += w * r
            else:
                total += np.where(running, w * r, 0.0)
            w *= agent.gamma
            ll += tab.log_probs[rows, states, acts, pidx]
            states = tab.next_states[rows, states, acts, pidx]
            smu = env.next_states[smu, acts, pidx]
            ref = ll.max(axis=0) if full else np.where(alive, ll, -np.inf).max(axis=0)
            alive &= (ll - ref) >= log_z
    return total


def vectorized_rollouts(agent: StochasticAgent, env, state: int, ell: int,
                        uniforms: np.ndarray) -> np.ndarray:
    """Returns of ``uniforms.shape[0]`` copies of a threshold agent from its current state."""
    return batched_rollouts(agent, env, [(agent.state, state)], ell, uniforms)


def _estimate(v_opt: float, returns: np.ndarray) -> GapEstimate:
    n = returns.size
    se = float(returns.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return GapEstimate(v_opt, float(returns.mean()), se, n)


def oracle_gap_batch(true_env, agent: StochasticAgent, snapshots: Sequence[tuple], ell: int,
                     rollouts: int, rng: np.random.Generator,
                     planner: Optional[Planner] = None) -> list[GapEstimate]:
    """``oracle_gap`` for several (HypothesisState, true state) snapshots of one agent.

    Consumes ``rng`` exactly as the sequence of single calls would.
    """
    if not snapshots:
        return []
    if not _vectorizable(agent, true_env):
        raise TypeError("batched gap estimation needs a threshold agent over tabular environments")
    planner = planner or agent.planner
    U = np.concatenate([rng.random((rollouts, ell)) for _ in snapshots])
    returns = batched_rollouts(agent, true_env, snapshots, ell, U).reshape(len(snapshots), rollouts)
    return [_estimate(planner.solve(true_env, s, ell)[0], r)
            for (_, s), r in zip(snapshots, returns)]


def oracle_gap(true_env: EnvironmentModel, agent_snapshot: OptimisticAgent, h: History, ell: int,
               rollouts: int, rng: Optional[np.random.Generator], planner: Optional[Planner] = None,
               true_state=None) -> GapEstimate:
    """Optimal ``ell``-truncated value in the true environment minus the agent's own value.

    Deterministic true environment and agent: one exact rollout.  Otherwise
    the mean of ``rollouts`` clone rollouts, with its standard error.
    """
    if not isinstance(agent_snapshot, OptimisticAgent):
        raise TypeError(f"cannot snapshot agent of type {type(agent_snapshot).__name__}")
    planner = planner or agent_snapshot.planner
    if true_state is None:
        true_state = true_env.state_after(h)
    v_opt, _ = planner.solve(true_env, true_state, ell)
    if true_env.deterministic and (isinstance(agent_snapshot, ConservativeAgent)
                                   or all(e.deterministic for e in agent_snapshot.envs)):
        v = rollout_return(agent_snapshot.clone(), true_env, h, true_state, ell, [0.0] * ell)
        return GapEstimate(v_opt, v, 0.0, 1)
    if rng is None:
        raise ValueError("a random stream is needed for stochastic gap estimation")
    U = rng.random((rollouts, ell))
    if _vectorizable(agent_snapshot, true_env):
        returns = vectorized_rollouts(agent_snapshot, true_env, true_state, ell, U)
    else:
        returns = np.array([rollout_return(agent_snapshot.clone(), true_env, h, true_state, ell, U[b])
                            for b in range(rollouts)])
    return _estimate(v_opt, returns)


def induced_policy(agent: OptimisticAgent, h: History, ell: int,
                   support: Optional[Sequence[EnvironmentModel]] = None) -> ActionTree:
    """Depth-``ell`` action tree the agent would follow from ``h``.

    Branches are expanded for percepts with positive probability under some
    environment in ``support`` (all percepts if ``support`` is None).  Where
    the agent's class empties, the subtree acts with action 0.
    """
    alph = agent.envs[0].alphabets
    nr = alph.num_rewards
    root_len = len(h)
    sup = list(support) if support is not None else None

    def build(ag, hist, states, d):
        try:
            a = ag.act(hist)
        except EmptyClassError:
            return ActionTree(0, {}, root_len, nr)
        node = ActionTree(a, {}, root_len, nr)
        if d == 1:
            return node
        if sup is None:
            ks = range(alph.num_percepts)
        else:
            mass = np.zeros(alph.num_percepts)
            for e, s in zip(sup, states):
                mass += e.percept_probs(s, a)
            ks = np.flatnonzero(mass > 0).tolist()
        for k in ks:
            child = ag.clone()
            h2 = hist.append(a, alph.percept_at(k))
            child.observe(h2)
            st2 = None if sup is None else [e.next_state(s, a, k) for e, s in zip(sup, states)]
            node.children[k] = build(child, h2, st2, d - 1)
        return node

    if ell == 0:
        return ActionTree(0, {}, root_len, nr)
    states0 = None if sup is None else [e.state_after(h) for e in sup]
    return build(agent.clone(), h, states0, ell)
