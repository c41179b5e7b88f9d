import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from optimist.core import Alphabets, History, Percept
from optimist.environments import (BernoulliBanditFamily, FiniteStateEnv, InvalidDistribution,
                                   KernelEnv, LikelihoodState, bernoulli_bandit, dtilde_horizon,
                                   is_consistent, sample_index, sample_percept,
                                   tv_distance_horizon, update_log_likelihoods)
from optimist.policies import ConstantPolicy

from oracles import random_tiny_env

ALPH = Alphabets(2, 1, (0.0, 1.0))


def test_rows_are_renormalized_once():
    env = FiniteStateEnv(ALPH, [[[1.0, 1.0], [3.0, 1.0]]], np.zeros((1, 2, 2), int))
    assert env.probs[0, 0].tolist() == [0.5, 0.5]
    assert env.probs[0, 1].tolist() == [0.75, 0.25]
    assert not env.deterministic
    with pytest.raises(ValueError):
        env.probs[0, 0, 0] = 1.0


@pytest.mark.parametrize("probs", [[[[0.0, 0.0], [1.0, 0.0]]], [[[-0.5, 1.5], [1.0, 0.0]]]])
def test_invalid_rows_rejected(probs):
    with pytest.raises(InvalidDistribution):
        FiniteStateEnv(ALPH, probs, np.zeros((1, 2, 2), int))


def test_shape_and_state_checks():
    with pytest.raises(ValueError):
        FiniteStateEnv(ALPH, np.ones((1, 3, 2)), np.zeros((1, 3, 2), int))
    with pytest.raises(ValueError):
        FiniteStateEnv(ALPH, np.ones((1, 2, 2)), np.ones((1, 2, 2), int))


def test_sample_index_inverse_cdf():
    p = np.array([0.2, 0.0, 0.5, 0.3])
    assert sample_index(p, 0.0) == 0
    assert sample_index(p, 0.19) == 0
    assert sample_index(p, 0.2) == 2
    assert sample_index(p, 0.69) == 2
    assert sample_index(p, 0.7) == 3
    assert sample_index(p, 0.9999999) == 3
    # rounding shortfall falls back to the last supported percept
    assert sample_index(np.array([0.5, 0.3, 0.0]), 0.99) == 1


def test_sample_percept_frequencies():
    env = bernoulli_bandit([0.3, 0.8])
    rng = np.random.default_rng(1)
    n = 20000
    hits = sum(sample_percept(env, History.empty(), 1, rng).reward_index for _ in range(n))
    assert abs(hits / n - 0.8) < 4 * math.sqrt(0.8 * 0.2 / n)


def test_consistency_replay():
    det = FiniteStateEnv(ALPH, [[[0, 1], [1, 0]]], np.zeros((1, 2, 2), int), name="d")
    good = History.empty().append(0, Percept(0, 1)).append(1, Percept(0, 0))
    bad = History.empty().append(0, Percept(0, 0))
    assert is_consistent(det, good)
    assert not is_consistent(det, bad)
    with pytest.raises(ValueError):
        is_consistent(bernoulli_bandit([0.5, 0.5]), good)


def test_log_likelihood_updates_match_products():
    envs = [bernoulli_bandit([0.3, 0.6]), bernoulli_bandit([0.5, 0.5])]
    steps = [(0, 1), (1, 0), (1, 1), (0, 0)]
    state = LikelihoodState.initial(envs)
    h = History.empty()
    for a, r in steps:
        state = update_log_likelihoods(state, envs, h, a, Percept(0, r))
        h = h.append(a, Percept(0, r))
    expected0 = 0.3 * 0.4 * 0.6 * 0.7
    expected1 = 0.5 ** 4
    assert state.log_likelihoods[0] == pytest.approx(math.log(expected0))
    assert state.log_likelihoods[1] == pytest.approx(math.log(expected1))
    with pytest.raises(ValueError):
        update_log_likelihoods(state, envs, History.empty(), 0, Percept(0, 0))


def _tv_bruteforce(e1, e2, action, H):
    """Constant-policy horizon-H total variation by listing every outcome sequence."""
    n = e1.alphabets.num_percepts
    total = 0.0
    for seq in itertools.product(range(n), repeat=H):
        p = q = 1.0
        s1, s2 = e1.initial_state(), e2.initial_state()
        for k in seq:
            p *= e1.probs[s1, action, k]
            q *= e2.probs[s2, action, k]
            s1, s2 = e1.next_states[s1, action, k], e2.next_states[s2, action, k]
        total += abs(p - q)
    return 0.5 * total


def test_tv_bernoulli_closed_forms():
    a, b = bernoulli_bandit([0.3, 0.5]), bernoulli_bandit([0.7, 0.5])
    assert tv_distance_horizon(a, b, History.empty(), ConstantPolicy(0), 1) == pytest.approx(0.4)
    assert tv_distance_horizon(a, b, History.empty(), ConstantPolicy(1), 3) == 0.0
    assert tv_distance_horizon(a, b, History.empty(), ConstantPolicy(0), 2) == pytest.approx(
        _tv_bruteforce(a, b, 0, 2))
    assert dtilde_horizon(a, b, 1) == pytest.approx(0.4)


def test_tv_guard():
    a = bernoulli_bandit([0.3, 0.5])
    with pytest.raises(ValueError):
        tv_distance_horizon(a, a, History.empty(), ConstantPolicy(0), 30)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 3))
def test_tv_matches_enumeration_and_is_a_metric(seed, H):
    rng = np.random.default_rng(seed)
    e1 = random_tiny_env(rng, max_actions=2, max_percepts=3)
    probs = rng.dirichlet(np.ones(e1.alphabets.num_percepts), size=e1.probs.shape[:2])
    e2 = FiniteStateEnv(e1.alphabets, probs, e1.next_states, 0)
    e3 = FiniteStateEnv(e1.alphabets, rng.dirichlet(np.ones(e1.alphabets.num_percepts),
                                                    size=e1.probs.shape[:2]), e1.next_states, 0)
    pi = ConstantPolicy(0)
    h = History.empty()
    d12 = tv_distance_horizon(e1, e2, h, pi, H)
    assert d12 == pytest.approx(_tv_bruteforce(e1, e2, 0, H), abs=1e-12)
    assert d12 == pytest.approx(tv_distance_horizon(e2, e1, h, pi, H), abs=1e-12)
    assert tv_distance_horizon(e1, e1, h, pi, H) == 0.0
    assert 0.0 <= d12 <= 1.0
    d13 = tv_distance_horizon(e1, e3, h, pi, H)
    d23 = tv_distance_horizon(e2, e3, h, pi, H)
    assert d13 <= d12 + d23 + 1e-12
    # longer horizons refine the event space
    assert tv_distance_horizon(e1, e2, h, pi, H + 1) >= d12 - 1e-12


def test_kernel_env_history_dependence():
    def kernel(h, a):
        # reward 1 iff the action repeats the previous one
        if len(h) == 0:
            return [1.0, 0.0]
        return [0.0, 1.0] if h.action == a else [1.0, 0.0]

    env = KernelEnv(ALPH, kernel, deterministic=True, name="repeat")
    h = History.empty().append(0, Percept(0, 0)).append(0, Percept(0, 1))
    assert is_consistent(env, h)
    assert env.log_prob(h, 1, 1) == -math.inf


def test_bernoulli_family_grid_and_instances():
    fam = BernoulliBanditFamily(2, [0], {1: 0.5}, name="bern")
    grid = fam.grid(0.05)
    assert len(grid) == 21 and grid[0] == (0.0,) and grid[-1] == (1.0,)
    assert all(type(x) is float for p in grid for x in p)
    env = fam.instantiate((0.25,))
    assert env.name == "bern[0.25]"
    assert env.probs[0, 0, 1] == 0.25 and env.probs[0, 1, 1] == 0.5
    with pytest.raises(ValueError):
        fam.instantiate((1.5,))
    with pytest.raises(ValueError):
        BernoulliBanditFamily(2, [0], {0: 0.5, 1: 0.5})
