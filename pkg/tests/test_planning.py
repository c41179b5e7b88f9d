import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from optimist.classes import builtin_class
from optimist.core import Alphabets, History, Percept, truncation_error_bound
from optimist.environments import KernelEnv, bernoulli_bandit
from optimist.planning import (ActionTree, EmptyClassError, Planner, PlanningBudgetExceeded,
                               optimal_value, optimistic_choice, policy_value)
from optimist.policies import ConstantPolicy

from oracles import brute_force_optimum, lp_optimum, random_tiny_env, tree_value


def test_two_arm_values():
    cls = builtin_class("two_arm")
    nu1, nu2 = cls.members
    v, pi = optimal_value(nu1, History.empty(), 3, 0.5)
    assert v == 1.75 and pi.root_action == 0
    v, pi = optimal_value(nu2, History.empty(), 5, 0.5)
    assert v == 1.9375 and pi.root_action == 1


def test_bernoulli_value():
    env = bernoulli_bandit([0.3, 0.7])
    v, pi = optimal_value(env, History.empty(), 2, 0.5)
    assert v == pytest.approx(1.05) and pi.root_action == 1
    assert policy_value(env, ConstantPolicy(0), History.empty(), 2, 0.5) == pytest.approx(0.45)


def test_horizon_zero():
    env = bernoulli_bandit([0.3, 0.7])
    v, pi = optimal_value(env, History.empty(), 0, 0.5)
    assert v == 0.0 and pi.root_action == 0
    with pytest.raises(ValueError):
        optimal_value(env, History.empty(), -1, 0.5)


def test_action_ties_go_to_smallest_index():
    env = bernoulli_bandit([0.5, 0.5, 0.5])
    assert optimal_value(env, History.empty(), 4, 0.9)[1].root_action == 0


def test_value_from_non_empty_history_uses_machine_state():
    det4 = builtin_class("det4")
    lock = det4.members[det4.index_of("lock")]
    h = History.empty().append(1, Percept(0, 0)).append(1, Percept(1, 0))
    v, _ = optimal_value(lock, h, 3, 0.5)
    assert v == 1.75
    v0, _ = optimal_value(lock, History.empty(), 3, 0.5)
    assert v0 == 0.25


def test_optimistic_choice_and_ties():
    cls = builtin_class("two_arm")
    plan = optimistic_choice(cls.members, History.empty(), 5, 0.5)
    assert plan.env_index == 0 and plan.root_action == 0 and plan.value == 1.9375
    rev = Planner(0.5).optimistic_choice(cls.members, History.empty(), 5, reverse=True)
    assert rev.env_index == 1 and rev.root_action == 1
    sub = Planner(0.5).optimistic_choice(cls.members, History.empty(), 5, indices=[1])
    assert sub.env_index == 1
    with pytest.raises(EmptyClassError):
        Planner(0.5).optimistic_choice(cls.members, History.empty(), 5, indices=[])


def _wrap_as_kernel(env):
    """The same machine seen as a history kernel, so the recursive search is used."""
    def kernel(h, a):
        return env.percept_probs(env.state_after(h), a)
    return KernelEnv(env.alphabets, kernel, deterministic=env.deterministic)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10 ** 9), st.integers(1, 4), st.floats(0.1, 0.95))
def test_expectimax_matches_policy_tree_enumeration(seed, ell, gamma):
    rng = np.random.default_rng(seed)
    env = random_tiny_env(rng, stochastic=bool(rng.integers(2)))
    brute = brute_force_optimum(env, 0, ell, gamma, limit=3000)
    ref = brute if brute is not None else lp_optimum(env, 0, ell, gamma)
    v, pi = Planner(gamma).optimal_value(env, History.empty(), ell)
    assert v == pytest.approx(ref, abs=1e-9)
    # the returned policy attains the value
    assert Planner(gamma).policy_value(env, pi, History.empty(), ell) == pytest.approx(v, abs=1e-12)
    # recursive search on the kernel view agrees with the tabular tables
    vk, _ = Planner(gamma).optimal_value(_wrap_as_kernel(env), History.empty(), ell)
    assert vk == pytest.approx(v, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 9), st.integers(1, 4))
def test_lp_and_enumeration_agree(seed, ell):
    rng = np.random.default_rng(seed)
    env = random_tiny_env(rng, max_actions=2, max_percepts=2)
    brute = brute_force_optimum(env, 0, ell, 0.7, limit=5000)
    if brute is not None:
        assert lp_optimum(env, 0, ell, 0.7) == pytest.approx(brute, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10 ** 9), st.integers(1, 4))
def test_policy_value_matches_tree_evaluation(seed, ell):
    rng = np.random.default_rng(seed)
    env = random_tiny_env(rng)
    A = env.alphabets.num_actions

    def random_tree(s, d):
        a = int(rng.integers(A))
        kids = {}
        if d > 1:
            for k in np.flatnonzero(env.probs[s, a] > 0):
                kids[int(k)] = random_tree(env.next_states[s, a, k], d - 1)
        return (a, kids)

    t = random_tree(0, ell)

    def to_action_tree(node):
        a, kids = node
        return ActionTree(a, {k: to_action_tree(c) for k, c in kids.items()}, 0,
                          env.alphabets.num_rewards)

    got = policy_value(env, to_action_tree(t), History.empty(), ell, 0.6)
    assert got == pytest.approx(tree_value(env, 0, ell, 0.6, t), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 9))
def test_truncated_values_converge(seed):
    rng = np.random.default_rng(seed)
    env = random_tiny_env(rng)
    g = 0.6
    p = Planner(g)
    v_long, _ = p.solve(env, 0, 60)
    for ell in range(6):
        v, _ = p.solve(env, 0, ell)
        assert v <= v_long + 1e-12
        assert v_long - v <= truncation_error_bound(ell, g) + 1e-12


def test_budget_exceeded_reports_node_count():
    alph = Alphabets(3, 3, (0.0, 1.0))
    env = KernelEnv(alph, lambda h, a: np.full(6, 1 / 6))
    with pytest.raises(PlanningBudgetExceeded) as info:
        Planner(0.5, node_budget=1000).solve(env, History.empty(), 6)
    assert info.value.node_count > 1000 and info.value.budget == 1000
