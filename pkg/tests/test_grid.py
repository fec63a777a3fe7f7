import numpy as np
import pytest

from mobgp.gp import KernelSpec, gram
from mobgp.gp.grid import build_grid_covariance, product_kernel_matrix
from mobgp.linalg import KroneckerOperator, ToeplitzMatrix
from mobgp.markov import TimeBinScheme


@pytest.mark.parametrize("bph", [1, 2, 4])
@pytest.mark.parametrize("period", [None, 168.0])
def test_flat_layout_matches_gram(bph, period):
    scheme = TimeBinScheme(bph)
    k = KernelSpec("rbf", 5.0, 0.8, period)
    op = build_grid_covariance(k, scheme)
    assert isinstance(op, ToeplitzMatrix)
    np.testing.assert_allclose(op.to_dense(), gram(k, scheme.centers()), atol=1e-14)


def test_wrapped_flat_layout_is_circulant():
    col = build_grid_covariance(KernelSpec("matern32", 9.0, 1.0), TimeBinScheme(1)).first_column
    np.testing.assert_allclose(col[1:], col[1:][::-1], atol=1e-15)


@pytest.mark.parametrize("bph", [1, 2])
def test_day_hour_layout_matches_product_kernel(bph, rng):
    scheme = TimeBinScheme(bph)
    k = KernelSpec("rbf", 6.0, 1.7)
    op = build_grid_covariance(k, scheme, "day_hour_grid")
    assert isinstance(op, KroneckerOperator)
    assert op.shape == (scheme.total_bins, scheme.total_bins)
    v = rng.standard_normal(scheme.total_bins)
    dense = product_kernel_matrix(k, scheme)
    np.testing.assert_allclose(op.matvec(v), dense @ v, atol=1e-10)


def test_day_hour_layout_tiny_lengthscale_is_identity():
    op = build_grid_covariance(KernelSpec("rbf", 1e-2, 1.0), TimeBinScheme(1), "day_hour_grid")
    np.testing.assert_allclose(op.to_dense(), np.eye(168), atol=1e-15)


def test_layout_validation():
    with pytest.raises(ValueError):
        build_grid_covariance(KernelSpec(), TimeBinScheme(1), "spiral")
    with pytest.raises(ValueError):
        build_grid_covariance(KernelSpec(period=24.0), TimeBinScheme(1))
