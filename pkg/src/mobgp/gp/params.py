"""Hyperparameters, their unconstrained vector form and the training set."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from ..report import TASKS
from .kernels import KernelSpec

NOISE_FLOOR = 1e-8
NOISE_MODES = ("shared", "per_task", "complementary")

# Bounds on unconstrained coordinates, applied after every optimiser step.
LOG_LENGTHSCALE_BOUNDS = (np.log(1e-2), np.log(1e4))
LOG_VARIANCE_BOUNDS = (np.log(NOISE_FLOOR), np.log(1e6))
LOG_CHOL_DIAG_BOUNDS = (-20.0, 10.0)


@dataclass(frozen=True)
class TaskCovariance:
    """Inter-task covariance ``K^f = L L^T`` held by its Cholesky factor."""

    cholesky_factor: np.ndarray

    def __post_init__(self):
        L = np.tril(np.asarray(self.cholesky_factor, dtype=float))
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise ValueError("task Cholesky factor must be square")
        if np.any(np.diag(L) <= 0):
            raise ValueError("task Cholesky factor needs a positive diagonal")
        L.setflags(write=False)
        object.__setattr__(self, "cholesky_factor", L)

    @property
    def n_tasks(self):
        return self.cholesky_factor.shape[0]

    @property
    def matrix(self):
        L = self.cholesky_factor
        return L @ L.T

    @classmethod
    def identity(cls, n_tasks):
        return cls(np.eye(n_tasks))

    @classmethod
    def from_matrix(cls, kf):
        return cls(np.linalg.cholesky(np.asarray(kf, dtype=float)))


def _pairs(n_tasks):
    """Task pairs sharing complementary noise: (pp, pm) and (mm, mp)."""
    if n_tasks != 4:
        raise ValueError("complementary noise needs the four transition tasks")
    return ((0, 1), (2, 3))


@dataclass(frozen=True)
class Hyperparameters:
    """Kernel, task covariance, noise and per-task constant mean.

    Noise modes:

    ``shared``
        ``D = s I`` with one variance ``s``.
    ``per_task``
        ``D = diag(s_1, ..., s_T)``.
    ``complementary``
        Each origin row's two tasks share one noise draw with opposite
        signs, ``D = blockdiag(s_p [[1, -1], [-1, 1]], s_m [[1, -1], [-1, 1]])
        + floor * I``. This matches empirical rows, whose two entries sum
        to exactly one.
    """

    kernel: KernelSpec
    task: TaskCovariance
    noise: np.ndarray
    mean: np.ndarray
    noise_mode: str = "per_task"

    def __post_init__(self):
        if self.noise_mode not in NOISE_MODES:
            raise ValueError(f"unknown noise mode {self.noise_mode!r}")
        T = self.task.n_tasks
        noise = np.atleast_1d(np.asarray(self.noise, dtype=float))
        expected = {"shared": 1, "per_task": T, "complementary": 2}[self.noise_mode]
        if self.noise_mode == "complementary":
            _pairs(T)
        if noise.shape != (expected,):
            raise ValueError(f"{self.noise_mode} noise needs {expected} values")
        if np.any(noise < NOISE_FLOOR * (1 - 1e-12)):
            raise ValueError(f"noise variances must be >= {NOISE_FLOOR}")
        mean = np.broadcast_to(np.asarray(self.mean, dtype=float), (T,)).copy()
        for a in (noise, mean):
            a.setflags(write=False)
        object.__setattr__(self, "noise", noise)
        object.__setattr__(self, "mean", mean)

    @property
    def n_tasks(self):
        return self.task.n_tasks

    def noise_matrix(self):
        T = self.n_tasks
        if self.noise_mode == "shared":
            return self.noise[0] * np.eye(T)
        if self.noise_mode == "per_task":
            return np.diag(self.noise)
        D = NOISE_FLOOR * np.eye(T)
        for s, (i, j) in zip(self.noise, _pairs(T)):
            D[i, i] += s
            D[j, j] += s
            D[i, j] -= s
            D[j, i] -= s
        return D

    def task_noise(self):
        """Marginal noise variance of each task."""
        return np.diag(self.noise_matrix()).copy()

    # unconstrained vector: [log l, log sf2, chol entries, log noise]
    def _chol_index(self):
        T = self.n_tasks
        return [(i, j) for i in range(T) for j in range(i + 1)]

    @property
    def n_params(self):
        return 2 + len(self._chol_index()) + self.noise.size

    def to_vector(self):
        L = self.task.cholesky_factor
        chol = [np.log(L[i, j]) if i == j else L[i, j] for i, j in self._chol_index()]
        return np.concatenate([[np.log(self.kernel.lengthscale),
                                np.log(self.kernel.signal_variance)],
                               chol, np.log(self.noise)])

    def from_vector(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters")
        kern = self.kernel.with_(lengthscale=float(np.exp(theta[0])),
                                 signal_variance=float(np.exp(theta[1])))
        T = self.n_tasks
        L = np.zeros((T, T))
        idx = self._chol_index()
        for (i, j), v in zip(idx, theta[2:2 + len(idx)]):
            L[i, j] = np.exp(v) if i == j else v
        noise = np.maximum(np.exp(theta[2 + len(idx):]), NOISE_FLOOR)
        return replace(self, kernel=kern, task=TaskCovariance(L), noise=noise)

    def bounds(self):
        """Per-coordinate (low, high) bounds of the unconstrained vector."""
        out = [LOG_LENGTHSCALE_BOUNDS, LOG_VARIANCE_BOUNDS]
        for i, j in self._chol_index():
            out.append(LOG_CHOL_DIAG_BOUNDS if i == j else (-np.inf, np.inf))
        out += [LOG_VARIANCE_BOUNDS] * self.noise.size
        return np.array(out, dtype=float)

    def parameter_names(self):
        names = ["log_lengthscale", "log_signal_variance"]
        names += [f"log_L{i}{j}" if i == j else f"L{i}{j}" for i, j in self._chol_index()]
        names += [f"log_noise{k}" for k in range(self.noise.size)]
        return names

    def noise_slice(self):
        start = 2 + len(self._chol_index())
        return slice(start, start + self.noise.size)

    def offdiag_indices(self):
        return [2 + k for k, (i, j) in enumerate(self._chol_index()) if i != j]

    def derivatives(self):
        """Derivative of each coordinate's contribution to the covariance.

        Yields ``(dKf, kernel_part, dD)`` per coordinate, where
        ``d Sigma = dKf ⊗ K + Kf ⊗ dK + dD ⊗ I`` and ``kernel_part`` names
        ``dK``: ``"lengthscale"`` or ``"signal"`` (``dK = K``), or ``None``.
        """
        T = self.n_tasks
        L = self.task.cholesky_factor
        out = [(None, "lengthscale", None), (None, "signal", None)]
        for i, j in self._chol_index():
            dL = np.zeros((T, T))
            dL[i, j] = L[i, j] if i == j else 1.0
            out.append((dL @ L.T + L @ dL.T, None, None))
        if self.noise_mode == "shared":
            out.append((None, None, self.noise[0] * np.eye(T)))
        elif self.noise_mode == "per_task":
            for k in range(T):
                dD = np.zeros((T, T))
                dD[k, k] = self.noise[k]
                out.append((None, None, dD))
        else:
            for s, (i, j) in zip(self.noise, _pairs(T)):
                dD = np.zeros((T, T))
                dD[i, i] = dD[j, j] = s
                dD[i, j] = dD[j, i] = -s
                out.append((None, None, dD))
        return out

    def to_dict(self):
        return {
            "kernel": {"family": self.kernel.family,
                       "log_lengthscale": float(np.log(self.kernel.lengthscale)),
                       "log_signal_variance": float(np.log(self.kernel.signal_variance)),
                       "period": self.kernel.period},
            "task_cholesky": self.task.cholesky_factor.tolist(),
            "noise_mode": self.noise_mode,
            "log_noise": np.log(self.noise).tolist(),
            "mean": self.mean.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        k = d["kernel"]
        kern = KernelSpec(k["family"], float(np.exp(k["log_lengthscale"])),
                          float(np.exp(k["log_signal_variance"])), k["period"])
        return cls(kern, TaskCovariance(np.array(d["task_cholesky"])),
                   np.maximum(np.exp(np.array(d["log_noise"])), NOISE_FLOOR),
                   np.array(d["mean"]), d["noise_mode"])


@dataclass(frozen=True)
class TrainingSet:
    """Inputs (hours, ascending), ``(N, T)`` targets and validity mask."""

    inputs: np.ndarray
    targets: np.ndarray
    mask: np.ndarray = None
    task_names: tuple = field(default=None)

    def __post_init__(self):
        t = np.asarray(self.inputs, dtype=float).ravel()
        y = np.asarray(self.targets, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        if y.shape[0] != t.size:
            raise ValueError("targets must have one row per input")
        m = np.isfinite(y) if self.mask is None else np.asarray(self.mask, dtype=bool)
        if m.shape != y.shape:
            raise ValueError("mask must match targets")
        m = m & np.isfinite(y)
        if np.any(np.diff(t) < 0):
            order = np.argsort(t, kind="stable")
            t, y, m = t[order], y[order], m[order]
        y = np.where(m, y, np.nan)
        names = self.task_names
        if names is None:
            names = TASKS if y.shape[1] == 4 else tuple(f"task{k}" for k in range(y.shape[1]))
        for a in (t, y, m):
            a.setflags(write=False)
        object.__setattr__(self, "inputs", t)
        object.__setattr__(self, "targets", y)
        object.__setattr__(self, "mask", m)
        object.__setattr__(self, "task_names", tuple(names))

    @property
    def n_inputs(self):
        return self.inputs.size

    @property
    def n_tasks(self):
        return self.targets.shape[1]

    @property
    def n_observed(self):
        return int(self.mask.sum())

    def task_means(self):
        out = np.zeros(self.n_tasks)
        for k in range(self.n_tasks):
            col = self.targets[self.mask[:, k], k]
            out[k] = col.mean() if col.size else 0.0
        return out

    def task_variances(self):
        out = np.zeros(self.n_tasks)
        for k in range(self.n_tasks):
            col = self.targets[self.mask[:, k], k]
            out[k] = col.var() if col.size > 1 else 0.0
        return out

    def select_tasks(self, idx):
        idx = list(idx)
        return TrainingSet(self.inputs, self.targets[:, idx], self.mask[:, idx],
                           tuple(self.task_names[k] for k in idx))

    def digest(self):
        h = hashlib.sha256()
        for a in (self.inputs, np.nan_to_num(self.targets, nan=-1.0), self.mask.astype(np.int8)):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()

    @classmethod
    def from_dataset(cls, ds):
        return cls(ds.scheme.centers(), ds.rows, ds.mask, TASKS)

    def to_dict(self):
        return {"inputs": self.inputs.tolist(),
                "targets": [[None if not np.isfinite(v) else float(v) for v in row]
                            for row in self.targets],
                "task_names": list(self.task_names)}

    @classmethod
    def from_dict(cls, d):
        y = np.array([[np.nan if v is None else v for v in row] for row in d["targets"]],
                     dtype=float)
        return cls(np.array(d["inputs"], dtype=float), y, None, tuple(d["task_names"]))
