"""The numba and numpy kernel variants must agree."""

import numpy as np
import pytest

from kdebo import kernels
from kdebo.rng import _direction_numbers


@pytest.mark.parametrize("d", [1, 3, 6])
def test_matern_variants_agree(rng, d):
    X1 = rng.uniform(size=(40, d))
    X2 = rng.uniform(size=(25, d))
    ls = rng.uniform(0.05, 2.0, size=d)
    a = kernels.matern52_numba(X1, X2, ls, 1.7)
    b = kernels.matern52_numpy(X1, X2, ls, 1.7)
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)


def test_matern_closed_form_at_known_distance():
    # r = sqrt(5) * 0.5 for unit distance and lengthscale 2
    r = np.sqrt(5.0) * 0.5
    expect = (1 + r + r * r / 3) * np.exp(-r)
    K = kernels.matern52_numba(np.array([[0.0]]), np.array([[1.0]]), np.array([2.0]), 1.0)
    assert K[0, 0] == pytest.approx(expect, rel=1e-14)


@pytest.mark.parametrize("d", [1, 2, 4])
def test_kde_variants_agree(rng, d):
    P = rng.uniform(size=(300, d))
    S = rng.uniform(size=(57, d))
    h = rng.uniform(0.01, 0.3, size=d)
    np.testing.assert_allclose(kernels.gauss_kde_numba(P, S, h),
                               kernels.gauss_kde_numpy(P, S, h), rtol=1e-12)


@pytest.mark.parametrize("dim,n", [(1, 1), (2, 7), (6, 1000), (10, 4096)])
def test_sobol_variants_agree(dim, n):
    V = _direction_numbers(dim)
    assert np.array_equal(kernels.sobol_ints_numba(V, n), kernels.sobol_ints_numpy(V, n))
