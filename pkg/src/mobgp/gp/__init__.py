"""Multi-task Gaussian process over week-phase hours."""

from .grid import build_grid_covariance
from .kernels import KernelSpec, cyclic_distance, gram, kernel_eval
from .likelihood import Evaluation, nll, nll_and_grad, nll_grad
from .model import (FitConfig, MultiTaskGP, PredictiveDistribution, fit,
                    initial_hyperparameters, scalar_posterior)
from .params import NOISE_FLOOR, Hyperparameters, TaskCovariance, TrainingSet

__all__ = [
    "build_grid_covariance", "KernelSpec", "cyclic_distance", "gram", "kernel_eval",
    "Evaluation", "nll", "nll_and_grad", "nll_grad", "FitConfig", "MultiTaskGP",
    "PredictiveDistribution", "fit", "initial_hyperparameters", "scalar_posterior",
    "NOISE_FLOOR", "Hyperparameters", "TaskCovariance", "TrainingSet",
]
