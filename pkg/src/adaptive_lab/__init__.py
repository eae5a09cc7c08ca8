"""Simulation and estimation toolkit for adaptively collected bandit data."""

__version__ = "0.1.0"

from .env import (Environment, Trajectory, empirical_gram, generate_trajectory,
                  load_trajectory, pooled_design_oracle, save_trajectory)
from .estimators import (EstimateReport, TargetSpec, one_step_estimate,
                         plugin_ols_estimate)
from .features import make_feature_map
from .harness import ExperimentConfig, run_experiment
from .policies import (EpsilonGreedyPolicy, LinUCBPolicy, UniformPolicy,
                       exploration_schedule, parse_policy)
from .rng import derive_seed, make_generator

__all__ = [
    "Environment", "EpsilonGreedyPolicy", "EstimateReport",
    "ExperimentConfig", "LinUCBPolicy", "TargetSpec", "Trajectory",
    "UniformPolicy", "derive_seed", "empirical_gram", "exploration_schedule",
    "generate_trajectory", "load_trajectory", "make_feature_map",
    "make_generator", "one_step_estimate", "parse_policy",
    "plugin_ols_estimate", "pooled_design_oracle", "run_experiment",
    "save_trajectory",
]
