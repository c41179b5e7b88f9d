"""Finite-horizon expectimax and the joint optimistic maximization over a class."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import History, check_gamma
from .environments import EnvironmentModel
from .policies import ActionTree, ConstantPolicy, Policy, TabularPolicy

DEFAULT_NODE_BUDGET = 10 ** 7
VALUE_TIE_TOL = 1e-9
ACTION_TIE_TOL = 1e-12

__all__ = [
    "ActionTree", "ConstantPolicy", "Plan", "Planner", "PlanningBudgetExceeded", "Policy",
    "TabularPolicy", "optimal_value", "optimistic_choice", "policy_value",
]


class PlanningBudgetExceeded(RuntimeError):
    def __init__(self, node_count: int, budget: int):
        super().__init__(f"expectimax node budget exceeded: {node_count} nodes > {budget}")
        self.node_count = node_count
        self.budget = budget


class EmptyClassError(RuntimeError):
    """Every hypothesis has been excluded."""


@dataclass(frozen=True)
class Plan:
    env_index: int
    root_action: int
    value: float
    horizon: int
    action_tree: Policy


class _Table:
    """Depth-indexed optimal values and actions of one tabular environment."""

    def __init__(self, env):
        self.env = env
        self.values = [np.zeros(env.num_states)]
        self.actions = [np.zeros(env.num_states, dtype=np.int64)]
        self.values_list = [self.values[0].tolist()]
        self.actions_list = [self.actions[0].tolist()]

    def extend(self, depth: int, gamma: float) -> int:
        env = self.env
        added = 0
        while len(self.values) <= depth:
            prev = self.values[-1]
            q = (env.probs * (env.rewards[None, None, :] + gamma * prev[env.next_states])).sum(axis=2)
            best = q.max(axis=1)
            act = np.argmax(q >= best[:, None] - ACTION_TIE_TOL, axis=1)
            self.values.append(q[np.arange(env.num_states), act])
            self.actions.append(act)
            self.values_list.append(self.values[-1].tolist())
            self.actions_list.append(act.tolist())
            added += q.size
        return added


class Planner:
    """Caching expectimax planner for a fixed discount.

    Values of a tabular environment depend only on (internal state, depth),
    so tables are computed once by backward induction and reused across calls.
    Other environments are searched recursively with a per-call transposition
    table keyed by (state, depth).
    """

    def __init__(self, gamma: float, node_budget: int = DEFAULT_NODE_BUDGET):
        self.gamma = check_gamma(gamma)
        self.node_budget = node_budget
        self._tables: dict[int, _Table] = {}

    def _table(self, env, depth: int) -> _Table:
        tab = self._tables.get(id(env))
        if tab is None or tab.env is not env:
            tab = self._tables[id(env)] = _Table(env)
        if len(tab.values) <= depth:
            size = env.num_states * env.alphabets.num_actions * depth
            if size > self.node_budget:
                raise PlanningBudgetExceeded(size, self.node_budget)
            tab.extend(depth, self.gamma)
        return tab

    def solve(self, env: EnvironmentModel, state, depth: int) -> tuple[float, int]:
        """Optimal ``depth``-truncated value from ``state`` and its best first action."""
        if depth < 0:
            raise ValueError("horizon must be >= 0")
        if getattr(env, "tabular", False):
            tab = self._table(env, depth)
            return tab.values_list[depth][state], tab.actions_list[depth][state]
        return self._search(env, state, depth, {}, [0])

    def action_fn(self, env):
        if getattr(env, "tabular", False):
            def lookup(state, depth):
                return self._table(env, depth).actions_list[depth][state]
            return lookup
        return lambda state, depth: self.solve(env, state, depth)[1]

    def _search(self, env, state, depth, memo, count):
        if depth == 0:
            return 0.0, 0
        key = (state, depth)
        hit = memo.get(key)
        if hit is not None:
            return hit
        count[0] += 1
        if count[0] > self.node_budget:
            raise PlanningBudgetExceeded(count[0], self.node_budget)
        g = self.gamma
        alph = env.alphabets
        best, best_a = -1.0, 0
        for a in range(alph.num_actions):
            probs = env.percept_probs(state, a)
            q = 0.0
            for k, p in enumerate(probs):
                if p > 0.0:
                    v, _ = self._search(env, env.next_state(state, a, k), depth - 1, memo, count)
                    q += p * (alph.reward_of(k) + g * v)
            if q > best + ACTION_TIE_TOL:
                best, best_a = q, a
        memo[key] = (best, best_a)
        return best, best_a

    def optimal_value(self, env: EnvironmentModel, h: History, ell: int,
                      state=None) -> tuple[float, Policy]:
        if state is None:
            state = env.state_after(h)
        value, _ = self.solve(env, state, ell)
        return value, TabularPolicy(env, state, len(h), ell, self.action_fn(env))

    def policy_value(self, env: EnvironmentModel, policy: Policy, h: History, ell: int,
                     state=None) -> float:
        """Expected ``ell``-truncated discounted return of ``policy`` from ``h``."""
        if ell < 0:
            raise ValueError("horizon must be >= 0")
        if state is None:
            state = env.state_after(h)
        g = self.gamma
        alph = env.alphabets
        count = [0]
        budget = self.node_budget

        def rec(hist, s, d):
            if d == 0:
                return 0.0
            count[0] += 1
            if count[0] > budget:
                raise PlanningBudgetExceeded(count[0], budget)
            a = policy.act(hist)
            probs = env.percept_probs(s, a)
            total = 0.0
            for k, p in enumerate(probs):
                if p > 0.0:
                    total += p * (alph.reward_of(k) + g * rec(
                        hist.append(a, alph.percept_at(k)), env.next_state(s, a, k), d - 1))
            return total

        return rec(h, state, ell)

    def optimistic_choice(self, envs: Sequence[EnvironmentModel], h: History, ell: int,
                          states: Optional[Sequence] = None,
                          indices: Optional[Sequence[int]] = None,
                          reverse: bool = False) -> Plan:
        """Best (environment, policy) pair; ties go to the earliest environment.

        ``indices`` restricts the search to a subset and the returned
        ``env_index`` refers to positions in ``envs``.
        """
        idx = list(range(len(envs))) if indices is None else list(indices)
        if not idx:
            raise EmptyClassError("optimistic choice over an empty class")
        if reverse:
            idx = idx[::-1]
        vals = []
        for i in idx:
            s = envs[i].state_after(h) if states is None else states[i]
            vals.append(self.solve(envs[i], s, ell)[0])
        top = max(vals)
        pos = next(j for j, v in enumerate(vals) if v >= top - VALUE_TIE_TOL)
        i = idx[pos]
        s = envs[i].state_after(h) if states is None else states[i]
        value, tree = self.optimal_value(envs[i], h, ell, state=s)
        root = tree.root_action
        return Plan(i, root, value, ell, tree)


def optimal_value(env: EnvironmentModel, h: History, ell: int, gamma: float,
                  node_budget: int = DEFAULT_NODE_BUDGET) -> tuple[float, Policy]:
    return Planner(gamma, node_budget).optimal_value(env, h, ell)


def policy_value(env: EnvironmentModel, policy: Policy, h: History, ell: int, gamma: float,
                 node_budget: int = DEFAULT_NODE_BUDGET) -> float:
    return Planner(gamma, node_budget).policy_value(env, policy, h, ell)


def optimistic_choice(class_view: Sequence[EnvironmentModel], h: History, ell: int,
                      gamma: float, node_budget: int = DEFAULT_NODE_BUDGET) -> Plan:
    return Planner(gamma, node_budget).optimistic_choice(class_view, h, ell)
