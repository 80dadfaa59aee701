"""Seeded random streams, Sobol sequences and quantile transforms."""

from __future__ import annotations

import zlib

import numpy as np
from scipy.special import ndtri

from kdebo.kernels import sobol_ints

_BITS = 52

# Joe-Kuo "new-joe-kuo-6.21201" direction numbers for dimensions 2..32:
# (degree s, polynomial coefficients a, initial m_1..m_s).
_JOE_KUO = (
    (1, 0, (1,)),
    (2, 1, (1, 3)),
    (3, 1, (1, 3, 1)),
    (3, 2, (1, 1, 1)),
    (4, 1, (1, 1, 3, 3)),
    (4, 4, (1, 3, 5, 13)),
    (5, 2, (1, 1, 5, 5, 17)),
    (5, 4, (1, 1, 5, 5, 5)),
    (5, 7, (1, 1, 7, 11, 19)),
    (5, 11, (1, 1, 5, 1, 1)),
    (5, 13, (1, 1, 1, 3, 11)),
    (5, 14, (1, 3, 5, 5, 31)),
    (6, 1, (1, 3, 3, 9, 7, 49)),
    (6, 13, (1, 1, 1, 15, 21, 21)),
    (6, 16, (1, 3, 1, 13, 27, 49)),
    (6, 19, (1, 1, 1, 15, 7, 5)),
    (6, 22, (1, 3, 1, 15, 13, 25)),
    (6, 25, (1, 1, 5, 5, 19, 61)),
    (7, 1, (1, 3, 7, 11, 23, 15, 103)),
    (7, 4, (1, 3, 7, 13, 13, 15, 69)),
    (7, 7, (1, 1, 3, 13, 7, 35, 63)),
    (7, 8, (1, 3, 5, 9, 1, 25, 53)),
    (7, 14, (1, 3, 1, 13, 9, 35, 107)),
    (7, 19, (1, 3, 1, 5, 27, 61, 31)),
    (7, 21, (1, 1, 5, 11, 19, 41, 61)),
    (7, 28, (1, 3, 5, 3, 3, 13, 69)),
    (7, 31, (1, 1, 7, 13, 1, 19, 1)),
    (7, 32, (1, 3, 7, 5, 13, 19, 59)),
    (7, 37, (1, 1, 3, 9, 25, 29, 41)),
    (7, 41, (1, 3, 5, 13, 23, 1, 55)),
    (7, 42, (1, 3, 7, 3, 13, 59, 17)),
)

MAX_SOBOL_DIM = len(_JOE_KUO) + 1


class UnsupportedDimensionError(ValueError):
    pass


class UnsupportedDistributionError(ValueError):
    pass


def _direction_numbers(dim: int) -> np.ndarray:
    V = np.zeros((dim, _BITS), dtype=np.uint64)
    for k in range(_BITS):
        V[0, k] = 1 << (_BITS - 1 - k)
    for j in range(1, dim):
        s, a, m = _JOE_KUO[j - 1]
        v = [m[k] << (_BITS - 1 - k) for k in range(s)]
        for k in range(s, _BITS):
            x = v[k - s] ^ (v[k - s] >> s)
            for i in range(1, s):
                if (a >> (s - 1 - i)) & 1:
                    x ^= v[k - i]
            v.append(x)
        V[j] = v
    return V


def sobol_points(dim: int, n: int) -> np.ndarray:
    """First ``n`` points of the unscrambled Sobol sequence in ``[0,1)^dim``."""
    if dim < 1 or n < 1:
        raise ValueError("dim and n must be positive")
    if dim > MAX_SOBOL_DIM:
        raise UnsupportedDimensionError(
            f"Sobol dimension {dim} exceeds table size {MAX_SOBOL_DIM}")
    if n > 1 << _BITS:
        raise ValueError("too many Sobol points requested")
    ints = sobol_ints(_direction_numbers(dim), n)
    return ints.astype(np.float64) / float(1 << _BITS)


def inverse_cdf_normal(u: float, mu: float = 0.0, sigma: float = 1.0) -> float:
    if not 0.0 < u < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {u}")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return float(mu + sigma * ndtri(u))


def qmc_context_samples(dist, n: int) -> np.ndarray:
    """Push ``n`` Sobol points through the per-dimension quantiles of ``dist``.

    Returns an ``(n, D_c)`` array clipped to the context box.
    """
    quantile = getattr(dist, "quantile", None)
    if quantile is None:
        raise UnsupportedDistributionError(f"{dist!r} has no quantile")
    U = sobol_points(dist.dim, n)
    C = quantile(U)
    lo, hi = dist.box
    return np.clip(C, lo, hi)


class SeedStream:
    """A seeded Philox stream with labelled, non-aliasing sub-streams.

    ``SeedStream(seed).child("env")`` always yields the same stream, and
    children with different labels draw from independent seed sequences.
    """

    def __init__(self, seed: int, _key: tuple = ()):
        if not 0 <= int(seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.key = tuple(_key)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
        self.gen = np.random.Generator(np.random.Philox(ss))

    def child(self, label) -> SeedStream:
        tag = label if isinstance(label, int) else zlib.crc32(str(label).encode())
        return SeedStream(self.seed, self.key + (int(tag),))

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.gen.normal(loc, scale, size)

    def standard_cauchy(self, size=None):
        return self.gen.standard_cauchy(size)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size)

    def choice(self, a, size=None, p=None):
        return self.gen.choice(a, size=size, p=p)

    def __repr__(self):
        return f"SeedStream(seed={self.seed}, key={self.key})"

