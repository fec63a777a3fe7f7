"""Factorised ``Sigma = Kf ⊗ K + D ⊗ I`` restricted to observed entries.

Vectors live in a ``(T, N)`` task-by-input layout; ``(M ⊗ K) vec(X)`` is
``vec(M X K^T)``. Two back-ends share one interface:

* :class:`DenseSystem` - Cholesky of the observed sub-matrix, any mask.
* :class:`KroneckerEigenSystem` - complete grids only; block-diagonalises
  the system in the eigenbasis of ``K`` into ``T x T`` blocks, so a solve
  costs two ``N x N`` products instead of an ``(NT)^3`` factorisation.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from ..linalg import jittered_cholesky


def real_fourier_basis(n):
    """Orthonormal real eigenbasis shared by all symmetric ``n x n`` circulants.

    Columns: constant, then ``cos``/``sin`` pairs for ``k = 1..(n-1)//2``,
    then the alternating vector when ``n`` is even. Also returns the FFT
    index of each column.
    """
    j = np.arange(n)
    cols = [np.full(n, 1.0 / np.sqrt(n))]
    freq = [0]
    for k in range(1, (n - 1) // 2 + 1):
        ang = 2 * np.pi * k * j / n
        cols.append(np.sqrt(2.0 / n) * np.cos(ang))
        cols.append(np.sqrt(2.0 / n) * np.sin(ang))
        freq += [k, k]
    if n % 2 == 0 and n > 1:
        cols.append((-1.0) ** j / np.sqrt(n))
        freq.append(n // 2)
    return np.column_stack(cols), np.array(freq)


class CirculantBasis:
    """Eigen-pairs of symmetric circulant matrices via the FFT."""

    def __init__(self, n):
        self.n = n
        self.vectors, self.freq = real_fourier_basis(n)

    def eigenvalues(self, first_column):
        return np.fft.rfft(first_column).real[self.freq]


class DenseSystem:
    def __init__(self, Kf, K, D, mask):
        T, N = Kf.shape[0], K.shape[0]
        self.T, self.N = T, N
        self.obs = np.flatnonzero(np.asarray(mask).T.ravel())
        full = np.kron(Kf, K) + np.kron(D, np.eye(N))
        sub = full[np.ix_(self.obs, self.obs)]
        self.L, self.jitter = jittered_cholesky(sub, 0.0)
        self.logdet = 2.0 * float(np.sum(np.log(np.diag(self.L))))
        self._inv4 = None

    def _embed(self, x):
        out = np.zeros(self.T * self.N)
        out[self.obs] = x
        return out.reshape(self.T, self.N)

    def solve(self, Y):
        y = np.asarray(Y, dtype=float).ravel()[self.obs]
        return self._embed(scipy.linalg.cho_solve((self.L, True), y))

    def _inverse(self):
        if self._inv4 is None:
            n = self.obs.size
            inv = scipy.linalg.cho_solve((self.L, True), np.eye(n))
            full = np.zeros((self.T * self.N, self.T * self.N))
            full[np.ix_(self.obs, self.obs)] = inv
            self._inv4 = full.reshape(self.T, self.N, self.T, self.N)
        return self._inv4

    def trace_matrix(self, Kmat=None, first_column=None):
        """``Tm`` with ``tr(Sigma^-1 (M ⊗ Kmat)) = sum(M * Tm)``; ``None`` = identity."""
        Q = self._inverse()
        if Kmat is None:
            return np.einsum("anbn->ab", Q)
        return np.einsum("anbm,nm->ab", Q, Kmat)

    def quad_forms(self, Kf, Kc):
        """``c^T Sigma^-1 c`` for ``c = vec(Kf[:, l] outer Kc[q])``; shape ``(T, Q)``."""
        T, Qn = self.T, Kc.shape[0]
        C = np.einsum("al,qn->anlq", Kf, Kc).reshape(T * self.N, T * Qn)[self.obs]
        Z = scipy.linalg.solve_triangular(self.L, C, lower=True)
        return np.sum(Z * Z, axis=0).reshape(T, Qn)


class KroneckerEigenSystem:
    """Solver for ``Kf ⊗ K + D ⊗ I`` on a fully observed grid.

    In the eigenbasis ``V`` of ``K`` the system is block diagonal with one
    ``T x T`` block ``lambda_j Kf + D`` per eigenvalue, so every operation
    costs two ``N x N`` basis products plus ``N`` tiny factorisations. For
    circulant ``K`` the eigenvalues come from an FFT of the first column.
    """

    def __init__(self, Kf, D, k_vals, k_vecs, circulant=None):
        self.T, self.N = Kf.shape[0], k_vals.size
        self.V = k_vecs
        self.k_vals = k_vals
        self.circulant = circulant
        blocks = k_vals[:, None, None] * Kf[None] + D[None]
        chol = np.linalg.cholesky(blocks)
        self.logdet = float(2.0 * np.sum(np.log(np.diagonal(chol, axis1=1, axis2=2))))
        eye = np.broadcast_to(np.eye(self.T), blocks.shape)
        linv = np.linalg.solve(chol, eye)
        self.block_inv = np.swapaxes(linv, 1, 2) @ linv
        self.jitter = 0.0

    def solve(self, Y):
        Z = np.asarray(Y, dtype=float) @ self.V
        Z = np.einsum("jab,bj->aj", self.block_inv, Z)
        return Z @ self.V.T

    def basis_diag(self, Kmat=None, first_column=None):
        if Kmat is None and first_column is None:
            return np.ones(self.N)
        if first_column is not None and self.circulant is not None:
            return self.circulant.eigenvalues(first_column)
        return np.sum(self.V * (Kmat @ self.V), axis=0)

    def trace_matrix(self, Kmat=None, first_column=None):
        return np.einsum("j,jab->ab", self.basis_diag(Kmat, first_column), self.block_inv)

    def quad_forms(self, Kf, Kc):
        b = self.V.T @ Kc.T
        g = np.einsum("al,jab,bl->lj", Kf, self.block_inv, Kf)
        return g @ (b * b)
