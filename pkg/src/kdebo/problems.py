"""Benchmark objectives and their context distributions.

Every problem lives on the unit box in both decision and context space and
is posed as a maximization. Objectives are vectorized over rows:
``objective(X, C)`` takes ``(n, D_x)`` and ``(n, D_c)`` arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import ndtri
from scipy.stats import norm

from kdebo.rng import SeedStream, UnsupportedDistributionError

_BOX_TOL = 1e-9


class DomainError(ValueError):
    pass


def _unit_box(dim):
    return (np.zeros(dim), np.ones(dim))


# -- context distributions -------------------------------------------------

@dataclass(frozen=True)
class ClippedNormal:
    mu: tuple
    sigma: tuple
    box: tuple = None

    def __post_init__(self):
        if any(s <= 0 for s in self.sigma):
            raise ValueError("sigma must be positive")
        if self.box is None:
            object.__setattr__(self, "box", _unit_box(len(self.mu)))

    @property
    def dim(self):
        return len(self.mu)

    def sample(self, stream: SeedStream, n: int) -> np.ndarray:
        C = stream.normal(np.asarray(self.mu), np.asarray(self.sigma), size=(n, self.dim))
        return np.clip(C, *self.box)

    def quantile(self, U):
        U = np.atleast_2d(U)
        return np.asarray(self.mu) + np.asarray(self.sigma) * ndtri(U)

    def pdf(self, C):
        C = np.atleast_2d(C)
        return np.prod(norm.pdf(C, np.asarray(self.mu), np.asarray(self.sigma)), axis=1)


@dataclass(frozen=True)
class Uniform:
    ndim: int = 1
    box: tuple = None

    def __post_init__(self):
        if self.box is None:
            object.__setattr__(self, "box", _unit_box(self.ndim))

    @property
    def dim(self):
        return self.ndim

    def sample(self, stream, n):
        lo, hi = self.box
        return stream.uniform(lo, hi, size=(n, self.dim))

    def quantile(self, U):
        lo, hi = self.box
        return lo + np.atleast_2d(U) * (hi - lo)

    def pdf(self, C):
        C = np.atleast_2d(C)
        lo, hi = self.box
        inside = np.all((C >= lo) & (C <= hi), axis=1)
        return inside / np.prod(hi - lo)


@dataclass(frozen=True)
class BurrXII:
    alpha: float
    beta: float
    box: tuple = None

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("Burr XII parameters must be positive")
        if self.box is None:
            object.__setattr__(self, "box", _unit_box(1))

    dim = 1

    def sample(self, stream, n):
        U = stream.uniform(size=(n, 1))
        return np.clip(self.quantile(U), *self.box)

    def quantile(self, U):
        U = np.atleast_2d(U)
        with np.errstate(divide="ignore"):
            return ((1.0 - U) ** (-1.0 / self.beta) - 1.0) ** (1.0 / self.alpha)

    def cdf(self, c):
        c = np.maximum(np.asarray(c, dtype=float), 0.0)
        return 1.0 - (1.0 + c ** self.alpha) ** (-self.beta)

    def pdf(self, C):
        c = np.atleast_2d(C)[:, 0]
        a, b = self.alpha, self.beta
        cp = np.maximum(c, 0.0)
        val = a * b * cp ** (a - 1.0) / (1.0 + cp ** a) ** (b + 1.0)
        return np.where(c < 0, 0.0, val)


@dataclass(frozen=True)
class NormalCauchyMixture:
    """1-D mixture of ``("normal", loc, scale)`` / ``("cauchy", loc, scale)``."""

    components: tuple
    weights: tuple = None
    box: tuple = None

    def __post_init__(self):
        if self.weights is None:
            k = len(self.components)
            object.__setattr__(self, "weights", tuple([1.0 / k] * k))
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise ValueError("mixture weights must sum to 1")
        if self.box is None:
            object.__setattr__(self, "box", _unit_box(1))

    dim = 1

    def sample(self, stream, n):
        kinds = np.array([k for k, _, _ in self.components])
        loc = np.array([m for _, m, _ in self.components])
        scale = np.array([s for _, _, s in self.components])
        idx = stream.choice(len(self.components), size=n, p=np.asarray(self.weights))
        z = stream.normal(size=n)
        cauchy = stream.standard_cauchy(size=n)
        draw = np.where(kinds[idx] == "cauchy", cauchy, z)
        return np.clip(loc[idx] + scale[idx] * draw, *self.box)[:, None]

    def quantile(self, U):
        raise UnsupportedDistributionError("mixture has no closed-form quantile")

    def pdf(self, C):
        c = np.atleast_2d(C)[:, 0]
        out = np.zeros_like(c, dtype=float)
        for w, (kind, loc, scale) in zip(self.weights, self.components):
            z = (c - loc) / scale
            if kind == "cauchy":
                out += w / (math.pi * scale * (1.0 + z * z))
            else:
                out += w * np.exp(-0.5 * z * z) / (scale * math.sqrt(2 * math.pi))
        return out


# -- objectives -------------------------------------------------------------

def ackley(X, C, a=20.0, b=0.2, h=2 * math.pi):
    Z = 65.536 * np.hstack([X, C]) - 32.768
    d = Z.shape[1]
    return (a * np.exp(-b * np.sqrt((Z * Z).sum(1) / d))
            - np.exp(np.cos(h * Z).sum(1) / d) + a + math.e)


def branin(u, v):
    a, b, c, r, s, t = 1.0, 5.1 / (4 * math.pi ** 2), 5 / math.pi, 6.0, 10.0, 1 / (8 * math.pi)
    return a * (v - b * u * u + c * u - r) ** 2 + s * (1 - t) * np.cos(u) + s


def modified_branin(X, C):
    h1 = branin(15 * X[:, 0] - 5, 15 * C[:, 0])
    h2 = branin(15 * C[:, 1] - 5, 15 * X[:, 1])
    return -np.sqrt(h1 * h2)


HARTMANN_ALPHA = np.array([1.0, 2.0, 3.0, 3.2])
HARTMANN_A = np.array([
    [10, 3, 17, 3.50, 1.7, 8],
    [0.05, 10, 17, 0.1, 8, 14],
    [3, 3.5, 1.7, 10, 17, 8],
    [17, 8, 0.05, 10, 0.1, 14],
])
HARTMANN_P = 1e-4 * np.array([
    [1312, 1696, 5569, 124, 8283, 5886],
    [2329, 4135, 8307, 3736, 1004, 9991],
    [2348, 1451, 3522, 2883, 3047, 6650],
    [4047, 8828, 8732, 5743, 1091, 381],
])


def hartmann6(X, C):
    Y = np.hstack([X, C])
    inner = (HARTMANN_A[None] * (Y[:, None, :] - HARTMANN_P[None]) ** 2).sum(-1)
    return np.exp(-inner) @ HARTMANN_ALPHA


def newsvendor(X, C):
    x, c = X[:, 0], C[:, 0]
    return 9.0 * np.minimum(x, c) + np.maximum(0.0, x - c) - 5.0 * x


def _gp_sample_objective(seed=0, n_features=500, lengthscale=0.2, dim=2):
    # random Fourier features of a unit-variance squared-exponential GP
    s = SeedStream(seed).child("gp-sample")
    W = s.normal(0.0, 1.0 / lengthscale, size=(n_features, dim))
    phase = s.uniform(0.0, 2 * math.pi, size=n_features)
    w = s.normal(size=n_features)
    scale = math.sqrt(2.0 / n_features)

    def f(X, C):
        Z = np.hstack([X, C])
        return scale * np.cos(Z @ W.T + phase) @ w

    return f


# -- problem container and registry -----------------------------------------

@dataclass(frozen=True)
class Problem:
    name: str
    dx: int
    dc: int
    objective: Callable
    dist: object
    noise_sigma: float = 0.0
    x_bounds: tuple = field(default=None)

    def __post_init__(self):
        if self.x_bounds is None:
            object.__setattr__(self, "x_bounds", _unit_box(self.dx))

    @property
    def c_bounds(self):
        return self.dist.box

    def __call__(self, X, C):
        return eval_problem(self, X, C)


def _as_rows(a, dim):
    a = np.asarray(a, dtype=float)
    if a.ndim <= 1:
        a = a.reshape(-1, dim)
    return a


def _check_box(A, lo, hi, what):
    if np.any(A < lo - _BOX_TOL) or np.any(A > hi + _BOX_TOL) or not np.all(np.isfinite(A)):
        raise DomainError(f"{what} outside its box")


def eval_problem(problem: Problem, x, c):
    """Noise-free objective value(s). Scalar in, scalar out."""
    scalar = np.ndim(x) <= 1 and np.ndim(c) <= 1
    X = _as_rows(x, problem.dx)
    C = _as_rows(c, problem.dc)
    X, C = np.broadcast_arrays(X, C) if X.shape[1] == C.shape[1] else _broadcast_rows(X, C)
    _check_box(X, *problem.x_bounds, "decision")
    _check_box(C, *problem.c_bounds, "context")
    out = problem.objective(X, C)
    return float(out[0]) if scalar else out


def _broadcast_rows(X, C):
    n = max(len(X), len(C))
    if len(X) not in (1, n) or len(C) not in (1, n):
        raise ValueError("row counts of x and c are incompatible")
    return np.repeat(X, n // len(X), 0), np.repeat(C, n // len(C), 0)


def observe(problem: Problem, x, c, stream: SeedStream):
    f = eval_problem(problem, x, c)
    if problem.noise_sigma == 0:
        return f
    return f + problem.noise_sigma * stream.normal(size=np.shape(f))


def sample_context(dist, stream: SeedStream, n: int | None = None):
    C = dist.sample(stream, 1 if n is None else n)
    return C[0] if n is None else C


def quantile(dist, u):
    return dist.quantile(u)


def pdf(dist, c):
    return dist.pdf(c)


COMPLICATED_MIXTURE = (
    ("normal", 0.1, 0.02), ("normal", 0.3, 0.075), ("normal", 0.4, 0.1),
    ("normal", 0.5, 0.1), ("normal", 0.7, 0.075), ("normal", 0.8, 0.03),
    ("cauchy", 0.2, 0.02), ("cauchy", 0.8, 0.02),
)


def _ackley_problem(dc, noise):
    return Problem(f"ackley" if dc == 1 else f"ackley-c{dc}", 2, dc, ackley,
                   ClippedNormal((0.5,) * dc, (0.15,) * dc), noise)


_REGISTRY = {
    "ackley": lambda noise: _ackley_problem(1, noise),
    "ackley-c4": lambda noise: _ackley_problem(4, noise),
    "modified-branin": lambda noise: Problem(
        "modified-branin", 2, 2, modified_branin, ClippedNormal((0.5, 0.5), (0.1, 0.1)), noise),
    "hartmann": lambda noise: Problem(
        "hartmann", 5, 1, hartmann6, ClippedNormal((0.5,), (0.1,)), noise),
    "hartmann-complicated": lambda noise: Problem(
        "hartmann-complicated", 5, 1, hartmann6, NormalCauchyMixture(COMPLICATED_MIXTURE), noise),
    "newsvendor": lambda noise: Problem(
        "newsvendor", 1, 1, newsvendor, BurrXII(2.0, 20.0), noise),
    "gp-sample": lambda noise: Problem(
        "gp-sample", 1, 1, _gp_sample_objective(), ClippedNormal((0.5,), (0.15,)), noise),
}

PROBLEM_NAMES = tuple(_REGISTRY)


def register_problem(name: str, factory: Callable[[float], Problem]):
    """Add a problem factory (``noise_sigma -> Problem``) under ``name``."""
    _REGISTRY[name] = factory


def problem_names() -> tuple:
    return tuple(_REGISTRY)


def get_problem(name: str, noise_sigma: float = 0.0) -> Problem:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; known: {', '.join(_REGISTRY)}") from None
    return factory(float(noise_sigma))
