"""Stationary kernels on week-phase hours, optionally wrapped to a cycle."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..markov import WEEK_HOURS

FAMILIES = ("rbf", "matern32")
SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family with lengthscale (hours) and signal variance.

    ``period`` wraps time differences to the cyclic distance
    ``min(|dt|, period - |dt|)``; ``None`` disables wrapping.
    """

    family: str = "rbf"
    lengthscale: float = 12.0
    signal_variance: float = 1.0
    period: float | None = float(WEEK_HOURS)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not self.lengthscale > 0 or not self.signal_variance > 0:
            raise ValueError("lengthscale and signal variance must be positive")

    def with_(self, **kw):
        return replace(self, **kw)

    def __call__(self, dt):
        return kernel_eval(self, dt)


def cyclic_distance(dt, period):
    d = np.abs(np.asarray(dt, dtype=float))
    if period is None:
        return d
    d = np.mod(d, period)
    return np.minimum(d, period - d)


def _profile(family, r):
    """Unit-variance kernel value and its derivative w.r.t. log lengthscale."""
    if family == "rbf":
        k = np.exp(-0.5 * r * r)
        return k, k * r * r
    e = np.exp(-SQRT3 * r)
    return (1.0 + SQRT3 * r) * e, 3.0 * r * r * e


def kernel_eval(spec, dt):
    r = cyclic_distance(dt, spec.period) / spec.lengthscale
    return spec.signal_variance * _profile(spec.family, r)[0]


def gram(spec, t1, t2=None, with_grad=False):
    """Kernel matrix between two sets of inputs.

    With ``with_grad`` also returns the derivative with respect to
    ``log(lengthscale)``.
    """
    t1 = np.asarray(t1, dtype=float)
    t2 = t1 if t2 is None else np.asarray(t2, dtype=float)
    r = cyclic_distance(t1[:, None] - t2[None, :], spec.period) / spec.lengthscale
    k, dk = _profile(spec.family, r)
    if with_grad:
        return spec.signal_variance * k, spec.signal_variance * dk
    return spec.signal_variance * k
