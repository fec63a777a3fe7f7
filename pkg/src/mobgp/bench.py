"""Timing harness comparing structured and dense covariance algebra.

Each measurement is the median of ``repetitions`` wall-clock runs after one
warm-up call. Every structured result is checked against its dense
counterpart before timing, so a fast but wrong kernel cannot be reported.
"""

from __future__ import annotations

import logging
import math
import statistics
import time
from dataclasses import astuple, dataclass

import numpy as np

from .gp.kernels import KernelSpec
from .gp.likelihood import Evaluation
from .gp.params import Hyperparameters, TaskCovariance, TrainingSet
from .linalg import (KroneckerOperator, SumWithScaledIdentity, cg_solve,
                     circulant_matvec, dense_cholesky_solve, kron_matvec,
                     toeplitz_from_kernel)
from .markov import TimeBinScheme

log = logging.getLogger(__name__)

COLUMNS = ("operation", "structure", "n", "median_ms", "speedup_vs_dense")
OPERATIONS = ("matvec", "kron_matvec", "solve", "gp_nll_grad")
# largest sizes for which the dense counterpart is still built
DENSE_MATVEC_LIMIT = 16384
DENSE_SOLVE_LIMIT = 4096
DENSE_KRON_LIMIT = 4096
MATVEC_TOL = 1e-10
SOLVE_TOL = 1e-8
GP_TOL = 1e-8
BENCH_NOISE = 0.1


@dataclass(frozen=True)
class BenchRow:
    operation: str
    structure: str
    n: int
    median_ms: float
    speedup_vs_dense: float

    def as_tuple(self):
        return astuple(self)


class BenchmarkMismatch(AssertionError):
    pass


def median_ms(fn, repetitions=5):
    """Median wall time of ``fn()`` in milliseconds over ``repetitions`` runs."""
    if repetitions < 5:
        raise ValueError("use at least 5 repetitions")
    fn()
    times = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1e3)
    return statistics.median(times)


def _check(name, n, fast, reference, tol):
    err = np.linalg.norm(fast - reference) / max(np.linalg.norm(reference), 1e-300)
    if not err <= tol:
        raise BenchmarkMismatch(f"{name} at n={n}: relative error {err:.3g} exceeds {tol:g}")


def _pair(op, n, t_struct, t_dense, structure):
    rows = [BenchRow(op, structure, n, t_struct,
                     t_dense / t_struct if t_dense is not None else math.nan)]
    if t_dense is not None:
        rows.insert(0, BenchRow(op, "dense", n, t_dense, 1.0))
    return rows


def _kernel_toeplitz(n, lengthscale=2.0):
    return toeplitz_from_kernel(KernelSpec("rbf", lengthscale, 1.0, None), np.arange(n, dtype=float))


def bench_matvec(n, repetitions, rng):
    T = _kernel_toeplitz(n)
    v = rng.standard_normal(n)
    T.embedding  # build the spectrum outside the timed region
    t_struct = median_ms(lambda: circulant_matvec(T, v), repetitions)
    t_dense = None
    if n <= DENSE_MATVEC_LIMIT:
        A = T.to_dense()
        _check("matvec", n, circulant_matvec(T, v), A @ v, MATVEC_TOL)
        t_dense = median_ms(lambda: A @ v, repetitions)
        del A
    return _pair("matvec", n, t_struct, t_dense, "toeplitz_fft")


def _kron_factors(n, rng):
    a = 1 << (int(math.log2(n)) // 2)
    b = n // a
    if a * b != n:
        raise ValueError(f"kron_matvec sizes must be powers of two, got {n}")
    fs = []
    for m in (a, b):
        x = rng.standard_normal((m, m))
        fs.append(x @ x.T / m + np.eye(m))
    return KroneckerOperator(fs)


def bench_kron_matvec(n, repetitions, rng):
    op = _kron_factors(n, rng)
    v = rng.standard_normal(n)
    t_struct = median_ms(lambda: kron_matvec(op, v), repetitions)
    t_dense = None
    if n <= DENSE_KRON_LIMIT:
        A = op.to_dense()
        _check("kron_matvec", n, kron_matvec(op, v), A @ v, MATVEC_TOL)
        t_dense = median_ms(lambda: A @ v, repetitions)
    return _pair("kron_matvec", n, t_struct, t_dense, "kronecker")


def bench_solve(n, repetitions, rng):
    op = SumWithScaledIdentity(_kernel_toeplitz(n), BENCH_NOISE)
    b = rng.standard_normal(n)
    solve = lambda: cg_solve(op, b, tol=1e-12)[0]
    t_struct = median_ms(solve, repetitions)
    t_dense = None
    if n <= DENSE_SOLVE_LIMIT:
        A = op.to_dense()
        _check("solve", n, solve(), dense_cholesky_solve(A, b), SOLVE_TOL)
        t_dense = median_ms(lambda: dense_cholesky_solve(A, b), repetitions)
    return _pair("solve", n, t_struct, t_dense, "cg_toeplitz_fft")


def _gp_problem(bins_per_hour, rng):
    scheme = TimeBinScheme(bins_per_hour)
    t = scheme.centers()
    base = 0.5 + 0.3 * np.sin(2 * np.pi * 7 * t / 168.0)
    noise = 0.05 * rng.standard_normal(t.size)
    pm = np.clip(base + noise, 0, 1)
    mp = np.clip(1 - base + 0.05 * rng.standard_normal(t.size), 0, 1)
    y = np.column_stack([1 - pm, pm, 1 - mp, mp])
    data = TrainingSet(t, y)
    L = np.eye(4) + 0.1 * np.tril(rng.standard_normal((4, 4)), -1)
    hyper = Hyperparameters(KernelSpec("rbf", 6.0, 0.05), TaskCovariance(L),
                            np.full(4, 0.01), data.task_means())
    return data, hyper


def bench_gp(bins_per_hour, repetitions, rng):
    data, hyper = _gp_problem(bins_per_hour, rng)
    n = data.n_observed

    def run(solver):
        ev = Evaluation(hyper, data, solver)
        return np.concatenate([[ev.nll()], ev.nll_grad()])

    ref, fast = run("dense"), run("structured")
    _check("gp_nll_grad", n, fast, ref, GP_TOL)
    t_struct = median_ms(lambda: run("structured"), repetitions)
    t_dense = median_ms(lambda: run("dense"), repetitions)
    return _pair("gp_nll_grad", n, t_struct, t_dense, "kronecker_eigen")


def run_bench(sizes=(1024, 2048, 4096), repetitions=5, operations=OPERATIONS,
              gp_bins_per_hour=(1, 2), seed=0):
    """Benchmark the requested operations.

    ``sizes`` drive the linear-algebra operations. The GP rows use complete
    weekly grids with ``gp_bins_per_hour`` bins per hour and four tasks.
    Dense counterparts are skipped above per-operation size limits, in
    which case the speed-up is NaN.
    """
    bad = [op for op in operations if op not in OPERATIONS]
    if bad:
        raise ValueError(f"unknown operations {bad}")
    if any(int(n) < 64 for n in sizes):
        raise ValueError("benchmark sizes must be at least 64")
    rng = np.random.default_rng(seed)
    rows = []
    table = {"matvec": bench_matvec, "kron_matvec": bench_kron_matvec, "solve": bench_solve}
    for op in operations:
        if op == "gp_nll_grad":
            for b in gp_bins_per_hour:
                rows += bench_gp(b, repetitions, rng)
            continue
        for n in sizes:
            log.info("bench %s n=%d", op, n)
            rows += table[op](int(n), repetitions, rng)
    return rows


def scaling_ratios(rows, operation, structure):
    """``time(2n) / time(n)`` for consecutive doublings in ``rows``."""
    pts = sorted((r.n, r.median_ms) for r in rows
                 if r.operation == operation and r.structure == structure)
    out = {}
    for (n1, t1), (n2, t2) in zip(pts, pts[1:]):
        if n2 == 2 * n1:
            out[n2] = t2 / t1
    return out


def doubling_ratio(rows, operation, structure):
    """Geometric-mean ``time(2n)/time(n)`` from the first to the last size."""
    pts = sorted((r.n, r.median_ms) for r in rows
                 if r.operation == operation and r.structure == structure)
    (n1, t1), (n2, t2) = pts[0], pts[-1]
    doublings = math.log2(n2 / n1)
    return (t2 / t1) ** (1.0 / doublings)
