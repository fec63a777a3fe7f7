"""Time-varying move/pause transition probabilities with constrained multi-task GPs.

The usual pipeline is simulate (or load) a move/pause sequence, bin it into
a weekly transition dataset, fit a multi-task GP under the row-sum and
non-negativity penalty, then predict the four transition probabilities at
any hour of the week.
"""

from .constraints import (ConstraintConfig, ConstraintPointSet, build_constraint_points,
                          evaluate_constraints, fit_constrained, penalized_objective)
from .gp import FitConfig, Hyperparameters, KernelSpec, MultiTaskGP, TrainingSet, fit
from .markov import (MobilityState, StateSequence, TimeBinScheme, TransitionCounts,
                     TransitionDataset, bin_observations, estimate_empirical, propagate)
from .report import TASKS, ConstraintReport
from .synth import SimulationConfig, TransitionFunctionSpec, eval_truth, simulate_chain

__version__ = "0.1.0"

__all__ = [
    "ConstraintConfig", "ConstraintPointSet", "build_constraint_points",
    "evaluate_constraints", "fit_constrained", "penalized_objective", "FitConfig",
    "Hyperparameters", "KernelSpec", "MultiTaskGP", "TrainingSet", "fit", "MobilityState",
    "StateSequence", "TimeBinScheme", "TransitionCounts", "TransitionDataset",
    "bin_observations", "estimate_empirical", "propagate", "TASKS", "ConstraintReport",
    "SimulationConfig", "TransitionFunctionSpec", "eval_truth", "simulate_chain",
]
