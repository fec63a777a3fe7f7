"""Linear solvers for covariance operators."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from ..exceptions import (DimensionError, MaxIterations, NotPositiveDefinite,
                          SingularFactor)
from .operators import (DenseOperator, KroneckerOperator, ToeplitzMatrix,
                        _kron_axiswise, as_operator)

JITTER_ESCALATIONS = 3
JITTER_RELATIVE = 1e-6
SINGULAR_COND = 1e14


def jittered_cholesky(matrix, jitter=0.0):
    """Lower Cholesky factor of ``matrix + j I``, escalating ``j`` on failure.

    The first attempt uses ``jitter``. Each of at most three escalations
    multiplies it by ten, starting from ``1e-6 * mean(diag)`` when
    ``jitter`` is zero.

    Returns
    -------
    L : ndarray
        Lower-triangular factor.
    used : float
        Jitter that was finally added.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError("matrix must be square")
    if jitter < 0:
        raise ValueError("jitter must be non-negative")
    scale = float(np.mean(np.abs(np.diag(a)))) or 1.0
    j = float(jitter)
    eye = np.eye(a.shape[0])
    for attempt in range(JITTER_ESCALATIONS + 1):
        try:
            L = scipy.linalg.cholesky(a + j * eye if j else a, lower=True, check_finite=True)
            return L, j
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            j = j * 10 if j > 0 else JITTER_RELATIVE * scale
    raise NotPositiveDefinite(f"matrix is not positive definite (last jitter tried {j / 10:.3g})")


def dense_cholesky_solve(matrix, rhs, jitter=0.0):
    """Solve ``(matrix + jitter I) x = rhs`` by Cholesky."""
    L, _ = jittered_cholesky(matrix, jitter)
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != L.shape[0]:
        raise DimensionError("rhs length does not match matrix")
    return scipy.linalg.cho_solve((L, True), rhs)


def cg_solve(op, rhs, tol=1e-10, max_iter=None):
    """Unpreconditioned conjugate gradients for symmetric PD operators.

    Stops when ``||op x - rhs|| <= tol * ||rhs||``.

    Returns
    -------
    x : ndarray
    iterations : int
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    op = as_operator(op)
    b = np.asarray(rhs, dtype=float)
    n = op.shape[0]
    if b.shape != (n,):
        raise DimensionError(f"rhs must have shape ({n},)")
    if max_iter is None:
        max_iter = 10 * n
    bnorm = np.linalg.norm(b)
    x = np.zeros(n)
    if bnorm == 0:
        return x, 0
    r = b.copy()
    p = r.copy()
    rr = r @ r
    for it in range(1, max_iter + 1):
        q = op.matvec(p)
        pq = p @ q
        if pq <= 0:
            raise NotPositiveDefinite("operator is not positive definite along a CG direction")
        alpha = rr / pq
        x += alpha * p
        r -= alpha * q
        rr_new = r @ r
        if np.sqrt(rr_new) <= tol * bnorm:
            # confirm against the true residual; recurrences drift
            true_res = np.linalg.norm(op.matvec(x) - b)
            if true_res <= tol * bnorm:
                return x, it
            r = b - op.matvec(x)
            rr_new = r @ r
            p = r.copy()
            rr = rr_new
            continue
        p = r + (rr_new / rr) * p
        rr = rr_new
    res = np.linalg.norm(op.matvec(x) - b) / bnorm
    raise MaxIterations(f"CG did not converge in {max_iter} iterations (residual {res:.3g})",
                        residual=res, iterations=max_iter)


def _factor_solver(f):
    if isinstance(f, ToeplitzMatrix):
        c = f.first_column

        def solve(m):
            try:
                out = scipy.linalg.solve_toeplitz(c, m)
            except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
                raise SingularFactor(f"Toeplitz factor is singular: {exc}") from exc
            if not np.all(np.isfinite(out)):
                raise SingularFactor("Toeplitz factor is singular")
            return out.reshape(m.shape)
        return solve
    if isinstance(f, KroneckerOperator):
        return lambda m: kron_solve(f, m)
    a = f.matrix if isinstance(f, DenseOperator) else np.asarray(f, dtype=float)
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > SINGULAR_COND:
        raise SingularFactor(f"factor is singular (condition number {cond:.3g})")
    try:
        chol = scipy.linalg.cho_factor(a, lower=True)
        return lambda m: scipy.linalg.cho_solve(chol, m)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        lu = scipy.linalg.lu_factor(a)
        return lambda m: scipy.linalg.lu_solve(lu, m)


def kron_solve(op, rhs):
    """Solve ``(F_1 ⊗ ... ⊗ F_d) x = rhs`` through per-factor solves.

    Uses ``(A ⊗ B)^{-1} = A^{-1} ⊗ B^{-1}``; Toeplitz factors go through
    Levinson recursion, dense factors through Cholesky (LU if indefinite).
    """
    if not isinstance(op, KroneckerOperator):
        op = KroneckerOperator([op])
    fns = [_factor_solver(f) for f in op.factors]
    return _kron_axiswise(op.sizes, fns, rhs)
