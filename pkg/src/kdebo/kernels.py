"""Hot numeric kernels, each with a numba and a numpy implementation.

The public names dispatch on :data:`kdebo._jit.USE_NUMBA`. Both variants
are importable under ``*_numba`` / ``*_numpy`` so tests and the benchmark
can compare them directly.
"""

import math

import numpy as np

from kdebo._jit import USE_NUMBA, njit

SQRT5 = math.sqrt(5.0)


# -- Matern-5/2 cross covariance ------------------------------------------

def matern52_numpy(X1, X2, lengthscales, signal_var=1.0):
    A = X1 / lengthscales
    B = X2 / lengthscales
    d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    np.maximum(d2, 0.0, out=d2)
    r = SQRT5 * np.sqrt(d2)
    return signal_var * (1.0 + r + r * r / 3.0) * np.exp(-r)


@njit(fastmath=False)
def matern52_numba(X1, X2, lengthscales, signal_var=1.0):
    n1, d = X1.shape
    n2 = X2.shape[0]
    out = np.empty((n1, n2))
    inv = 1.0 / lengthscales
    for i in range(n1):
        for j in range(n2):
            s = 0.0
            for k in range(d):
                t = (X1[i, k] - X2[j, k]) * inv[k]
                s += t * t
            r = SQRT5 * math.sqrt(s)
            out[i, j] = signal_var * (1.0 + r + r * r / 3.0) * math.exp(-r)
    return out


# -- Gaussian product-kernel density ----------------------------------------

def gauss_kde_numpy(points, samples, h):
    t, dim = samples.shape
    norm = t * np.prod(h) * (2.0 * np.pi) ** (dim / 2.0)
    out = np.zeros(points.shape[0])
    # chunk over queries to bound memory at ~4M doubles
    step = max(1, 4_000_000 // max(t * dim, 1))
    for lo in range(0, points.shape[0], step):
        U = (points[lo:lo + step, None, :] - samples[None, :, :]) / h
        out[lo:lo + step] = np.exp(-0.5 * (U * U).sum(-1)).sum(1)
    return out / norm


@njit
def gauss_kde_numba(points, samples, h):
    n, dim = points.shape
    t = samples.shape[0]
    norm = float(t) * (2.0 * math.pi) ** (dim / 2.0)
    for k in range(dim):
        norm *= h[k]
    out = np.empty(n)
    for i in range(n):
        acc = 0.0
        for j in range(t):
            s = 0.0
            for k in range(dim):
                u = (points[i, k] - samples[j, k]) / h[k]
                s += u * u
            acc += math.exp(-0.5 * s)
        out[i] = acc / norm
    return out


# -- Sobol integer generation (Gray-code order) -----------------------------

def sobol_ints_numpy(V, n):
    """Integer Sobol points for direction-number matrix ``V`` (dim x bits).

    Point ``i`` is the XOR of the direction numbers selected by the bits of
    the Gray code of ``i``, which equals the Antonov-Saleev recursion.
    """
    dim, bits = V.shape
    idx = np.arange(n, dtype=np.uint64)
    gray = idx ^ (idx >> np.uint64(1))
    out = np.zeros((n, dim), dtype=np.uint64)
    for k in range(bits):
        mask = ((gray >> np.uint64(k)) & np.uint64(1)).astype(bool)
        if not mask.any():
            break
        out[mask] ^= V[:, k]
    return out


@njit
def sobol_ints_numba(V, n):
    dim, bits = V.shape
    out = np.zeros((n, dim), dtype=np.uint64)
    cur = np.zeros(dim, dtype=np.uint64)
    for i in range(1, n):
        # index of the lowest zero bit of i - 1
        c = 0
        m = i - 1
        while m & 1:
            m >>= 1
            c += 1
        for k in range(dim):
            cur[k] ^= V[k, c]
            out[i, k] = cur[k]
    return out


if USE_NUMBA:
    matern52 = matern52_numba
    gauss_kde = gauss_kde_numba
    sobol_ints = sobol_ints_numba
else:
    matern52 = matern52_numpy
    gauss_kde = gauss_kde_numpy
    sobol_ints = sobol_ints_numpy
