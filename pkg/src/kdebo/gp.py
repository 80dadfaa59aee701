"""Matern-5/2 Gaussian-process regression with ARD lengthscales."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize

from kdebo.kernels import SQRT5, matern52

LENGTHSCALE_BOUNDS = (1e-3, 1e3)
SIGNAL_BOUNDS = (1e-3, 1e3)
NOISE_BOUNDS = (1e-6, 1.0)
JITTER_LADDER = (0.0, 1e-8, 1e-6, 1e-4)


class NumericalError(RuntimeError):
    pass


@dataclass(frozen=True)
class GpHyperparams:
    lengthscales: np.ndarray
    signal_variance: float = 1.0
    noise_variance: float = 1e-2
    flag: str | None = None

    @classmethod
    def default(cls, dim: int, flag=None):
        return cls(np.ones(dim), 1.0, 1e-2, flag)

    def to_log(self):
        return np.concatenate([np.log(self.lengthscales),
                               [math.log(self.signal_variance), math.log(self.noise_variance)]])

    @classmethod
    def from_log(cls, theta):
        theta = np.asarray(theta, dtype=float)
        return cls(np.exp(theta[:-2]), float(np.exp(theta[-2])), float(np.exp(theta[-1])))


def _log_bounds(dim):
    return ([tuple(np.log(LENGTHSCALE_BOUNDS))] * dim
            + [tuple(np.log(SIGNAL_BOUNDS)), tuple(np.log(NOISE_BOUNDS))])


def _cholesky(K):
    for jitter in JITTER_LADDER:
        try:
            A = K if jitter == 0.0 else K + jitter * np.eye(len(K))
            return np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            continue
    raise NumericalError("Cholesky failed after jitter escalation")


def gram(X, hyper: GpHyperparams):
    return matern52(X, X, hyper.lengthscales, hyper.signal_variance)


def log_marginal_likelihood(X, y, hyper: GpHyperparams) -> float:
    """Exact log evidence of ``y`` under the zero-mean GP prior."""
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n == 0:
        return 0.0
    K = gram(np.asarray(X, dtype=float), hyper) + hyper.noise_variance * np.eye(n)
    L = _cholesky(K)
    a = cho_solve((L, True), y)
    return float(-0.5 * y @ a - np.log(np.diag(L)).sum() - 0.5 * n * math.log(2 * math.pi))


def lml_and_grad(theta, X, y):
    """Log evidence and its gradient w.r.t. log-hyperparameters."""
    hyper = GpHyperparams.from_log(theta)
    n, d = X.shape
    ls, sf = hyper.lengthscales, hyper.signal_variance
    D2 = (X[:, None, :] - X[None, :, :]) ** 2 / ls ** 2
    r = SQRT5 * np.sqrt(D2.sum(-1))
    e = np.exp(-r)
    Kf = sf * (1.0 + r + r * r / 3.0) * e
    K = Kf + hyper.noise_variance * np.eye(n)
    L = _cholesky(K)
    a = cho_solve((L, True), y)
    lml = -0.5 * y @ a - np.log(np.diag(L)).sum() - 0.5 * n * math.log(2 * math.pi)
    W = np.outer(a, a) - cho_solve((L, True), np.eye(n))
    common = sf * (5.0 / 3.0) * (1.0 + r) * e
    grad = np.empty(d + 2)
    for k in range(d):
        grad[k] = 0.5 * np.sum(W * common * D2[:, :, k])
    grad[d] = 0.5 * np.sum(W * Kf)
    grad[d + 1] = 0.5 * hyper.noise_variance * np.trace(W)
    return float(lml), grad


def fit_hyperparams(X, y, stream=None, restarts: int = 5) -> GpHyperparams:
    """Maximize the log evidence over log-hyperparameters with L-BFGS-B.

    The first restart starts from the defaults; the rest from log-uniform
    draws. Returns the restart with the highest evidence.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if n < 2:
        return GpHyperparams.default(d)
    if np.all(np.ptp(X, axis=0) == 0):
        return GpHyperparams.default(d, flag="degenerate-inputs")

    bounds = _log_bounds(d)
    starts = [GpHyperparams.default(d).to_log()]
    for _ in range(max(restarts, 1) - 1):
        u = stream.uniform(size=d + 2) if stream is not None else np.full(d + 2, 0.5)
        starts.append(np.concatenate([
            np.log(0.05) + u[:d] * (np.log(2.0) - np.log(0.05)),
            [np.log(0.2) + u[d] * (np.log(5.0) - np.log(0.2)),
             np.log(1e-4) + u[d + 1] * (np.log(0.1) - np.log(1e-4))],
        ]))

    def neg(theta):
        try:
            f, g = lml_and_grad(theta, X, y)
        except NumericalError:
            return 1e25, np.zeros_like(theta)
        return -f, -g

    best, best_val = None, -np.inf
    for theta0 in starts:
        res = minimize(neg, theta0, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": 200})
        if np.isfinite(res.fun) and -res.fun > best_val:
            best, best_val = res.x, -res.fun
    if best is None:
        return GpHyperparams.default(d, flag="fit-failed")
    return GpHyperparams.from_log(best)


class GpPosterior:
    """Posterior of a zero-mean GP given noisy observations.

    Inputs are mapped to the unit cube through ``bounds``; targets are
    optionally shifted and scaled by ``y_mean`` / ``y_std``. All queries take
    and return values in the caller's units.
    """

    def __init__(self, X, y, hyper: GpHyperparams, bounds=None, standardize=False):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float).ravel()
        self.dim = hyper.lengthscales.shape[0]
        if X.size == 0:
            X = np.zeros((0, self.dim))
        if bounds is None:
            bounds = (np.zeros(self.dim), np.ones(self.dim))
        self.lo = np.asarray(bounds[0], dtype=float)
        self.span = np.asarray(bounds[1], dtype=float) - self.lo
        self.hyper = hyper
        if standardize and len(y) > 0:
            self.y_mean = float(y.mean())
            sd = float(y.std())
            self.y_std = sd if sd > 0 else 1.0
        else:
            self.y_mean, self.y_std = 0.0, 1.0
        self.X = self._normalize(X)
        self.y = (y - self.y_mean) / self.y_std
        n = len(self.y)
        if n:
            K = gram(self.X, hyper) + hyper.noise_variance * np.eye(n)
            self.L = _cholesky(K)
            self.weights = cho_solve((self.L, True), self.y)
            self.L_inv = solve_triangular(self.L, np.eye(n), lower=True)
        else:
            self.L = self.L_inv = np.zeros((0, 0))
            self.weights = np.zeros(0)

    def _normalize(self, Z):
        return (Z - self.lo) / self.span

    @property
    def n(self):
        return len(self.y)

    def mean_var(self, Z):
        """Posterior mean and (clamped) variance at the rows of ``Z``."""
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        Zn = self._normalize(Z)
        sf = self.hyper.signal_variance
        if self.n == 0:
            return np.full(len(Z), self.y_mean), np.full(len(Z), sf * self.y_std ** 2)
        Ks = matern52(np.ascontiguousarray(Zn), self.X, self.hyper.lengthscales, sf)
        mean = Ks @ self.weights
        V = Ks @ self.L_inv.T
        var = np.maximum(sf - np.einsum("ij,ij->i", V, V), 0.0)
        return mean * self.y_std + self.y_mean, var * self.y_std ** 2

    def ucb(self, Z, sqrt_beta: float):
        mean, var = self.mean_var(Z)
        return mean + sqrt_beta * np.sqrt(var)


def posterior(X, y, hyper: GpHyperparams, bounds=None, standardize=False) -> GpPosterior:
    return GpPosterior(X, y, hyper, bounds, standardize)


def mean_var(post: GpPosterior, z):
    m, v = post.mean_var(z)
    if np.ndim(z) <= 1:
        return float(m[0]), float(v[0])
    return m, v


def ucb(post: GpPosterior, z, sqrt_beta: float):
    u = post.ucb(z, sqrt_beta)
    return float(u[0]) if np.ndim(z) <= 1 else u


def fit_gp(X, y, bounds, stream=None, restarts=5, hyper: GpHyperparams | None = None):
    """Standardize, optionally refit hyperparameters, and build the posterior.

    Passing ``hyper`` skips fitting and reuses those values.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    lo = np.asarray(bounds[0], dtype=float)
    span = np.asarray(bounds[1], dtype=float) - lo
    if hyper is None:
        sd = y.std() if len(y) else 1.0
        ys = (y - y.mean()) / (sd if sd > 0 else 1.0) if len(y) else y
        hyper = fit_hyperparams((X - lo) / span, ys, stream, restarts)
    return GpPosterior(X, y, hyper, bounds, standardize=True)
