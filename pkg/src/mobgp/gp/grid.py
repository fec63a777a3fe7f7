"""Structured covariance operators on the weekly bin grid.

Two layouts are offered. ``flat_1d`` treats the week as one line of
``168 * b`` equally spaced bins. ``day_hour_grid`` treats it as a
7 x 24b grid and uses a product kernel ``k_day(d - d') * k_hour(h - h')``,
whose covariance is the Kronecker product of the two factor matrices.
"""

from __future__ import annotations

import numpy as np

from ..linalg import KroneckerOperator, ToeplitzMatrix, toeplitz_from_kernel
from ..markov import WEEK_HOURS
from .kernels import KernelSpec

LAYOUTS = ("flat_1d", "day_hour_grid")
DAYS = 7
HOURS_PER_DAY = 24


def build_grid_covariance(kernel: KernelSpec, scheme, layout="flat_1d"):
    """Covariance of ``kernel`` over the bin centres of ``scheme``.

    Parameters
    ----------
    kernel : KernelSpec
        With ``period`` set, distances wrap around the week. On a grid that
        tiles the whole period the wrapped matrix is symmetric circulant,
        which is a special case of symmetric Toeplitz, so both settings
        give a :class:`ToeplitzMatrix` for ``flat_1d``.
    scheme : TimeBinScheme
    layout : {"flat_1d", "day_hour_grid"}

    Returns
    -------
    ToeplitzMatrix or KroneckerOperator
        For ``day_hour_grid`` the day factor is a unit-variance kernel
        evaluated at whole-day offsets (wrapped over the week when
        ``kernel.period`` is set) and the hour factor carries the signal
        variance over offsets within one day, never wrapped.
    """
    if layout not in LAYOUTS:
        raise ValueError(f"unknown layout {layout!r}")
    step = scheme.bin_hours
    if layout == "flat_1d":
        if kernel.period is not None and abs(kernel.period - WEEK_HOURS) > 1e-12:
            raise ValueError("wrapped flat layout needs a one-week period")
        return toeplitz_from_kernel(kernel, np.arange(scheme.total_bins) * step)
    day_kernel = kernel.with_(signal_variance=1.0)
    day_col = day_kernel(np.arange(DAYS) * float(HOURS_PER_DAY))
    hour_kernel = kernel.with_(period=None)
    hour_col = hour_kernel(np.arange(HOURS_PER_DAY * scheme.bins_per_hour) * step)
    return KroneckerOperator([ToeplitzMatrix(day_col), ToeplitzMatrix(hour_col)])


def product_kernel_matrix(kernel: KernelSpec, scheme):
    """Dense matrix of the ``day_hour_grid`` product kernel, for checking."""
    c = scheme.centers()
    day = np.floor(c / HOURS_PER_DAY)
    hour = c - HOURS_PER_DAY * day
    k_day = kernel.with_(signal_variance=1.0)(HOURS_PER_DAY * (day[:, None] - day[None, :]))
    k_hour = kernel.with_(period=None)(hour[:, None] - hour[None, :])
    return k_day * k_hour
