"""Optimistic agents for history-based reinforcement learning over finite and compact classes."""

from .agents import (AgentConfig, CompactRadiusAgent, ConservativeAgent, LiberalAgent,
                     StochasticAgent, build_cover, make_agent)
from .classes import EnvironmentClass, builtin_class, load_class, resolve_class
from .config import ConfigError, ExperimentConfig, load_config
from .core import (Alphabets, History, Percept, discounted_return, horizon_for_epsilon,
                   truncation_error_bound)
from .environments import FiniteStateEnv, KernelEnv, tv_distance_horizon
from .harness import batch_run, certify_det_bound, certify_stoch, run_episode
from .oracle import oracle_gap
from .planning import Planner, optimal_value, optimistic_choice, policy_value

__version__ = "0.1.0"
