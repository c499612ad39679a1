"""Batched Thompson sampling for stochastic multi-armed bandits."""

__version__ = "0.1.0"

from .argmax import GaussianBelief, argmax_prob, argmax_prob_mc, argmax_prob_two, std_normal_cdf
from .core import ArmStats, BanditInstance, BatchRecord, RunTrace, pseudo_regret, update_stats
from .exceptions import InputError, UsageError
from .ingest import builtin, movielens_instance
from .policies import PolicyConfig, btsi_grid, run_btsd, run_btsi
from .simulator import ExperimentSpec, run_experiment, run_once

__all__ = [
    "ArmStats",
    "BanditInstance",
    "BatchRecord",
    "ExperimentSpec",
    "GaussianBelief",
    "InputError",
    "PolicyConfig",
    "RunTrace",
    "UsageError",
    "argmax_prob",
    "argmax_prob_mc",
    "argmax_prob_two",
    "btsi_grid",
    "builtin",
    "movielens_instance",
    "pseudo_regret",
    "run_btsd",
    "run_btsi",
    "run_experiment",
    "run_once",
    "std_normal_cdf",
    "update_stats",
]
