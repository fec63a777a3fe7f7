"""Covariance operators with a shared ``matvec`` / ``to_dense`` surface.

Variants: :class:`DenseOperator`, :class:`ToeplitzMatrix` (circulant
embedding + FFT), :class:`KroneckerOperator` and
:class:`SumWithScaledIdentity`.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from ..exceptions import DimensionError, NotRegularGrid

# Kronecker operators refuse dense expansion above this total size.
MAX_DENSE_KRON = 4096


def _check_len(n, v):
    v = np.asarray(v, dtype=float)
    if v.shape[0] != n:
        raise DimensionError(f"expected leading dimension {n}, got {v.shape[0]}")
    return v


class DenseOperator:
    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError("dense operator must be a square matrix")
        self.matrix = m

    @property
    def shape(self):
        return self.matrix.shape

    def matvec(self, v):
        return self.matrix @ _check_len(self.shape[0], v)

    def to_dense(self):
        return self.matrix.copy()

    def diagonal(self):
        return np.diag(self.matrix).copy()


def embedding_size(n):
    """Smallest power of two that is at least ``2n - 2`` (and at least 1)."""
    target = max(2 * n - 2, 1)
    return 1 << (target - 1).bit_length()


class CirculantEmbedding:
    """FFT spectrum of the symmetric circulant that contains a Toeplitz block.

    Only used for products. The embedding need not be positive definite
    because it is never inverted.
    """

    def __init__(self, first_column):
        c = np.asarray(first_column, dtype=float)
        n = c.size
        size = embedding_size(n)
        col = np.zeros(size)
        col[:n] = c
        if n > 1:
            col[size - n + 1:] = c[:0:-1]
        self.n = n
        self.size = size
        self.circulant_spectrum = np.fft.rfft(col)

    def matvec(self, v):
        v = _check_len(self.n, v)
        vf = np.fft.rfft(v, n=self.size, axis=0)
        spec = self.circulant_spectrum if v.ndim == 1 else self.circulant_spectrum[:, None]
        return np.fft.irfft(spec * vf, n=self.size, axis=0)[: self.n]


class ToeplitzMatrix:
    """Symmetric Toeplitz matrix stored by its first column."""

    def __init__(self, first_column):
        c = np.asarray(first_column, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise DimensionError("first column must be a non-empty 1-D array")
        self.first_column = c
        self._embedding = None

    @property
    def n(self):
        return self.first_column.size

    @property
    def shape(self):
        return (self.n, self.n)

    @property
    def embedding(self):
        if self._embedding is None:
            self._embedding = CirculantEmbedding(self.first_column)
        return self._embedding

    def matvec(self, v):
        return circulant_matvec(self, v)

    def to_dense(self):
        return scipy.linalg.toeplitz(self.first_column)

    def diagonal(self):
        return np.full(self.n, self.first_column[0])


def circulant_matvec(t, v):
    """``T @ v`` in ``O(N log N)`` via the circulant embedding of ``t``."""
    return t.embedding.matvec(v)


def toeplitz_from_kernel(kernel, grid):
    """Toeplitz covariance of a stationary ``kernel(dt)`` on a regular grid."""
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise NotRegularGrid("grid must be a non-empty 1-D array")
    if g.size == 1:
        return ToeplitzMatrix(np.atleast_1d(kernel(np.zeros(1))).astype(float))
    d = np.diff(g)
    step = d.mean()
    if step <= 0 or np.max(np.abs(d - step)) > 1e-9 * abs(step):
        raise NotRegularGrid("grid spacing is not uniform")
    return ToeplitzMatrix(np.asarray(kernel(np.arange(g.size) * step), dtype=float))


def _apply(factor, m):
    """``factor @ m`` for a factor of any supported kind; ``m`` is (n, k)."""
    if isinstance(factor, np.ndarray):
        return factor @ m
    return factor.matvec(m)


class KroneckerOperator:
    """``factors[0] ⊗ factors[1] ⊗ ...`` applied without expansion."""

    def __init__(self, factors):
        fs = []
        for f in factors:
            if isinstance(f, (ToeplitzMatrix, DenseOperator, KroneckerOperator)):
                fs.append(f)
            else:
                fs.append(DenseOperator(f))
        if not fs:
            raise DimensionError("Kronecker operator needs at least one factor")
        self.factors = fs

    @property
    def sizes(self):
        return tuple(f.shape[0] for f in self.factors)

    @property
    def shape(self):
        n = int(np.prod(self.sizes))
        return (n, n)

    def matvec(self, v):
        return kron_matvec(self, v)

    def to_dense(self, force=False):
        if self.shape[0] > MAX_DENSE_KRON and not force:
            raise DimensionError(f"refusing to expand a {self.shape[0]}-dim Kronecker operator")
        out = np.ones((1, 1))
        for f in self.factors:
            out = np.kron(out, f.to_dense())
        return out

    def diagonal(self):
        out = np.ones(1)
        for f in self.factors:
            out = np.kron(out, f.diagonal())
        return out

    def condition_numbers(self):
        return [float(np.linalg.cond(f.to_dense())) for f in self.factors]


def _kron_axiswise(sizes, apply_fns, v):
    """Apply ``apply_fns[i]`` along axis ``i`` of ``v`` reshaped to ``sizes``."""
    N = int(np.prod(sizes))
    v = _check_len(N, v)
    extra = v.shape[1:]
    x = v.reshape(tuple(sizes) + extra)
    for i, (n_i, fn) in enumerate(zip(sizes, apply_fns)):
        x = np.moveaxis(x, i, 0)
        moved_shape = x.shape
        y = fn(x.reshape(n_i, -1))
        x = np.moveaxis(y.reshape(moved_shape), 0, i)
    return x.reshape((N,) + extra)


def kron_matvec(op, v):
    """Reshape-multiply product, ``O(N * sum(n_i))`` for dense factors."""
    fns = [(lambda m, f=f: _apply(f, m)) for f in op.factors]
    return _kron_axiswise(op.sizes, fns, v)


class SumWithScaledIdentity:
    """``base + shift * I``."""

    def __init__(self, base, shift):
        if not hasattr(base, "matvec"):
            base = DenseOperator(base)
        self.base = base
        self.shift = float(shift)

    @property
    def shape(self):
        return self.base.shape

    def matvec(self, v):
        v = _check_len(self.shape[0], v)
        return self.base.matvec(v) + self.shift * v

    def to_dense(self):
        return self.base.to_dense() + self.shift * np.eye(self.shape[0])

    def diagonal(self):
        return self.base.diagonal() + self.shift


def as_operator(x):
    if hasattr(x, "matvec"):
        return x
    return DenseOperator(x)
