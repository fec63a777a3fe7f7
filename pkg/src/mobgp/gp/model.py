"""Fitted multi-task GP: hyperparameter search, prediction and JSON I/O."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg

from ..exceptions import DegenerateData, ModelMismatch
from ..markov import WEEK_HOURS
from .kernels import KernelSpec, gram
from .likelihood import Evaluation
from .optim import Adam, lbfgs
from .params import NOISE_FLOOR, Hyperparameters, TaskCovariance, TrainingSet

MODEL_VERSION = 1
NEGATIVE_VARIANCE_TOL = 1e-10


@dataclass(frozen=True)
class FitConfig:
    """Optimiser and model settings for :func:`fit`.

    ``fix_noise`` pins every noise variance to the given value;
    ``independent_tasks`` pins the task covariance to a diagonal.
    """

    n_iter: int = 500
    learning_rate: float = 0.05
    optimizer: str = "adam"
    solver: str = "auto"
    noise_mode: str = "per_task"
    kernel_family: str = "rbf"
    lengthscale_init: float = 12.0
    noise_init: float = 0.05 ** 2
    period: float | None = float(WEEK_HOURS)
    fix_noise: float | None = None
    independent_tasks: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.optimizer not in ("adam", "lbfgs"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.n_iter < 0:
            raise ValueError("n_iter must be non-negative")


def check_fittable(data):
    """Raise :class:`DegenerateData` unless every task has two observed targets."""
    counts = data.mask.sum(axis=0)
    if data.n_tasks == 0 or np.any(counts < 2):
        raise DegenerateData(f"each task needs at least 2 observed targets, got {counts.tolist()}")


def initial_hyperparameters(data, config):
    """Starting point: lengthscale from the config, signal variance equal to
    the target variance, identity task covariance, constant noise."""
    T = data.n_tasks
    var = float(np.mean(data.task_variances()))
    kernel = KernelSpec(config.kernel_family, config.lengthscale_init, max(var, 1e-6),
                        config.period)
    L = np.eye(T)
    if T > 1 and not config.independent_tasks:
        rng = np.random.default_rng(config.seed)
        L[np.tril_indices(T, -1)] = 1e-3 * rng.standard_normal(T * (T - 1) // 2)
    n_noise = {"shared": 1, "per_task": T, "complementary": 2}[config.noise_mode]
    noise0 = config.noise_init if config.fix_noise is None else config.fix_noise
    return Hyperparameters(kernel, TaskCovariance(L), np.full(n_noise, max(noise0, NOISE_FLOOR)),
                           data.task_means(), config.noise_mode)


def free_mask(hyper, config):
    free = np.ones(hyper.n_params, dtype=bool)
    if config.fix_noise is not None:
        free[hyper.noise_slice()] = False
    if config.independent_tasks:
        free[hyper.offdiag_indices()] = False
    return free


def optimize(objective, hyper0, config):
    """Minimise ``objective(hyper) -> (value, grad)`` from ``hyper0``.

    Returns the best hyperparameters and the per-iteration objective trace.
    """
    fun = lambda theta: objective(hyper0.from_vector(theta))
    theta0 = hyper0.to_vector()
    free = free_mask(hyper0, config)
    bounds = hyper0.bounds()
    if config.optimizer == "adam":
        theta, _, trace = Adam(config.learning_rate).run(fun, theta0, config.n_iter, bounds, free)
    else:
        theta, _, trace = lbfgs(fun, theta0, config.n_iter, bounds, free)
    return hyper0.from_vector(theta), trace


@dataclass(frozen=True)
class PredictiveDistribution:
    queries: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    task_names: tuple = ()

    @property
    def std(self):
        return np.sqrt(self.variance)

    def task(self, name):
        k = self.task_names.index(name)
        return self.mean[:, k], self.variance[:, k]


class MultiTaskGP:
    """A GP with fixed hyperparameters conditioned on a training set.

    The factorisation of ``Kf ⊗ K + D ⊗ I`` over observed targets is built
    once at construction.
    """

    def __init__(self, hyper, training, solver="auto", loss_trace=(), bins_per_hour=None):
        self.hyper = hyper
        self.training = training
        self._eval = Evaluation(hyper, training, solver)
        self.solver = self._eval.solver
        self.loss_trace = list(loss_trace)
        self.bins_per_hour = bins_per_hour

    @property
    def task_names(self):
        return self.training.task_names

    def nll(self):
        return self._eval.nll()

    def posterior_mean(self, queries):
        return self._eval.posterior_mean(np.atleast_1d(np.asarray(queries, dtype=float)))

    def predict(self, queries, include_noise=False):
        """Posterior mean and marginal variance of every task at ``queries``.

        Variances are of the latent function unless ``include_noise``.
        """
        q = np.atleast_1d(np.asarray(queries, dtype=float))
        ev = self._eval
        Kc = gram(self.hyper.kernel, q, self.training.inputs)
        mean = (self.hyper.mean[:, None] + ev.Kf @ ev.alpha @ Kc.T).T
        prior = self.hyper.kernel.signal_variance * np.diag(ev.Kf)
        var = (prior[:, None] - ev.system.quad_forms(ev.Kf, Kc)).T
        worst = var.min() if var.size else 0.0
        if worst < -NEGATIVE_VARIANCE_TOL:
            raise ArithmeticError(f"negative predictive variance {worst:.3g}")
        var = np.maximum(var, 0.0)
        if include_noise:
            var = var + self.hyper.task_noise()[None, :]
        return PredictiveDistribution(q, mean, var, self.task_names)

    def to_dict(self):
        return {
            "version": MODEL_VERSION,
            "hyperparameters": self.hyper.to_dict(),
            "solver": self.solver,
            "scheme": None if self.bins_per_hour is None else {"bins_per_hour": self.bins_per_hour},
            "training": self.training.to_dict(),
            "training_digest": self.training.digest(),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        if d.get("version") != MODEL_VERSION:
            raise ModelMismatch(f"unsupported model version {d.get('version')!r}")
        training = TrainingSet.from_dict(d["training"])
        if training.digest() != d["training_digest"]:
            raise ModelMismatch("training data digest does not match")
        scheme = d.get("scheme")
        return cls(Hyperparameters.from_dict(d["hyperparameters"]), training, d["solver"],
                   bins_per_hour=None if scheme is None else scheme["bins_per_hour"])

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def scalar_posterior(kernel, inputs, targets, noise, queries, mean=0.0):
    """Single-task closed form: mean and latent variance at ``queries``.

    ``mu* = m + k*^T (K + s I)^-1 (a - m)`` and
    ``var* = k(t*, t*) - k*^T (K + s I)^-1 k*``.
    """
    t = np.asarray(inputs, dtype=float)
    a = np.asarray(targets, dtype=float)
    q = np.atleast_1d(np.asarray(queries, dtype=float))
    K = gram(kernel, t) + noise * np.eye(t.size)
    Ks = gram(kernel, q, t)
    factor = scipy.linalg.cho_factor(K, lower=True)
    mu = mean + Ks @ scipy.linalg.cho_solve(factor, a - mean)
    var = kernel.signal_variance - np.sum(Ks.T * scipy.linalg.cho_solve(factor, Ks.T), axis=0)
    return mu, var


def fit(data, config=FitConfig(), bins_per_hour=None):
    """Maximum-marginal-likelihood fit of all hyperparameters.

    The per-task mean stays at the training average. The returned model
    carries ``loss_trace`` (objective per iteration, start included).
    """
    check_fittable(data)
    h0 = initial_hyperparameters(data, config)

    def objective(h):
        ev = Evaluation(h, data, config.solver)
        return ev.nll(), ev.nll_grad()

    best, trace = optimize(objective, h0, config)
    return MultiTaskGP(best, data, config.solver, trace, bins_per_hour)


def fit_config_dict(config):
    return asdict(config)
