"""Epsilon-greedy Thompson sampling for finite and continuous MDPs.

Submodules:

* ``mdp`` -- finite MDP models, policies, trajectories
* ``environments`` -- toy two-state MDP, RiverSwim, glucose AR(2) cohort
* ``inference`` -- grid posteriors and conjugate Bayesian linear regression
* ``planning`` -- value iteration and exact policy evaluation
* ``fqi`` -- fitted Q iteration with randomized trees or k-NN
* ``agents`` -- online agents
* ``metrics`` -- distances, errors and rate slopes
* ``experiments`` -- Monte-Carlo runner, aggregation and CSV output
"""
from .agents import DeltaSchedule, EpsilonGreedyTS
from .environments import GlucoseParams, RiverSwimParams, ToyParams, riverswim_model, toy_model
from .errors import ConfigError, ConvergenceError, DomainError, NumericalError, PosteriorStateError
from .experiments import aggregate, make_config, run_experiment
from .inference import GaussianPosterior, GridPosterior, SufficientCounts, blr_update, grid_update
from .mdp import FiniteMdpModel, Policy
from .planning import policy_evaluation, value_iteration
from .rng import RngStream

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "DeltaSchedule",
    "DomainError",
    "EpsilonGreedyTS",
    "FiniteMdpModel",
    "GaussianPosterior",
    "GlucoseParams",
    "GridPosterior",
    "NumericalError",
    "Policy",
    "PosteriorStateError",
    "RiverSwimParams",
    "RngStream",
    "SufficientCounts",
    "ToyParams",
    "aggregate",
    "blr_update",
    "grid_update",
    "make_config",
    "policy_evaluation",
    "riverswim_model",
    "run_experiment",
    "toy_model",
    "value_iteration",
]
