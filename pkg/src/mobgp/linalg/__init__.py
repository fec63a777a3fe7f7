"""Structured covariance algebra: Toeplitz, circulant, Kronecker, dense."""

from .operators import (CirculantEmbedding, DenseOperator, KroneckerOperator,
                        SumWithScaledIdentity, ToeplitzMatrix, as_operator,
                        circulant_matvec, embedding_size, kron_matvec,
                        toeplitz_from_kernel)
from .solvers import cg_solve, dense_cholesky_solve, jittered_cholesky, kron_solve

__all__ = [
    "CirculantEmbedding", "DenseOperator", "KroneckerOperator", "SumWithScaledIdentity",
    "ToeplitzMatrix", "as_operator", "circulant_matvec", "embedding_size", "kron_matvec",
    "toeplitz_from_kernel", "cg_solve", "dense_cholesky_solve", "jittered_cholesky",
    "kron_solve",
]
