"""Acquisition functions over the decision box and their maximization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from kdebo.dro import context_grid, robust_values
from kdebo.rng import sobol_points

KINDS = ("expected_ucb", "robust_ucb", "plain_ucb", "stable_ucb")
ROWS_PER_CHUNK = 1 << 16
FD_STEP = 1e-4


def delta_schedule(t: int, dc: int) -> float:
    """TV radius ``t^(-2 / (4 + D_c))``."""
    if t < 1:
        raise ValueError("t must be >= 1")
    return float(t) ** (-2.0 / (4.0 + dc))


@dataclass(frozen=True)
class Schedules:
    """``beta_mode``: ``("fixed", sqrt_beta)`` or ``("theoretical", a, b, r, D_x)``.
    ``delta_mode``: ``("schedule",)`` or ``("fixed", delta)``."""

    beta_mode: tuple = ("fixed", 1.5)
    delta_mode: tuple = ("schedule",)

    def __post_init__(self):
        if self.beta_mode[0] == "theoretical" and min(self.beta_mode[1:4]) <= 0:
            raise ValueError("a, b, r must be positive")
        if self.beta_mode[0] not in ("fixed", "theoretical"):
            raise ValueError(f"unknown beta mode {self.beta_mode[0]!r}")
        if self.delta_mode[0] not in ("schedule", "fixed"):
            raise ValueError(f"unknown delta mode {self.delta_mode[0]!r}")

    def delta(self, t: int, dc: int) -> float:
        if self.delta_mode[0] == "fixed":
            return float(self.delta_mode[1])
        return delta_schedule(t, dc)


def theoretical_beta(t: int, dx: int, a: float, b: float, r: float) -> float:
    return (2.0 * math.log(t * t / math.sqrt(2.0 * math.pi))
            + 2.0 * dx * math.log(t * t * dx * a * b * r * math.sqrt(math.pi) / 2.0))


def beta_schedule(sched: Schedules, t: int) -> float:
    """Returns ``sqrt(beta_t)``; negative theoretical values clamp to zero."""
    if t < 1:
        raise ValueError("t must be >= 1")
    if sched.beta_mode[0] == "fixed":
        return float(sched.beta_mode[1])
    a, b, r, dx = sched.beta_mode[1:5]
    return math.sqrt(max(0.0, theoretical_beta(t, int(dx), a, b, r)))


@dataclass(frozen=True)
class AcquisitionSpec:
    kind: str
    sqrt_beta: float = 1.5
    m_samples: int = 1024
    delta: float | None = None
    stable_box: tuple | None = None
    n_inf_grid: int = 1024
    n_stable_grid: int = 1024

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown acquisition kind {self.kind!r}")
        if self.sqrt_beta < 0:
            raise ValueError("sqrt_beta must be non-negative")
        if (self.kind == "robust_ucb") != (self.delta is not None):
            raise ValueError("delta is required exactly for robust_ucb")
        if (self.kind == "stable_ucb") != (self.stable_box is not None):
            raise ValueError("stable_box is required exactly for stable_ucb")
        if self.delta is not None and self.delta < 0:
            raise ValueError("delta must be non-negative")


class Acquisition:
    """Batch-evaluable acquisition with its random inputs frozen.

    SAA context samples (expected/robust) are drawn once at construction, so
    ``acq(X)`` is a deterministic function of ``X``.
    """

    def __init__(self, spec: AcquisitionSpec, post, kde=None, stream=None, c_bounds=None):
        self.spec = spec
        self.post = post
        self.contexts = None
        self.grid = None
        if spec.kind in ("expected_ucb", "robust_ucb"):
            if kde is None:
                raise ValueError(f"{spec.kind} needs a KDE model")
            self.contexts = kde.sample(spec.m_samples, stream)
            if c_bounds is None:
                c_bounds = kde.clip_box
        if spec.kind == "robust_ucb":
            self.grid = context_grid(c_bounds, spec.n_inf_grid)
        elif spec.kind == "stable_ucb":
            self.grid = context_grid(spec.stable_box, spec.n_stable_grid)

    def _ucb_over(self, X, C):
        """``(B, len(C))`` matrix of ucb at every (x, c) pair."""
        B, G = len(X), len(C)
        out = np.empty((B, G))
        step = max(1, ROWS_PER_CHUNK // G)
        for lo in range(0, B, step):
            Xb = X[lo:lo + step]
            Z = np.hstack([np.repeat(Xb, G, axis=0), np.tile(C, (len(Xb), 1))])
            out[lo:lo + step] = self.post.ucb(Z, self.spec.sqrt_beta).reshape(len(Xb), G)
        return out

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        kind = self.spec.kind
        if kind == "plain_ucb":
            return self.post.ucb(X, self.spec.sqrt_beta)
        if kind == "stable_ucb":
            return self._ucb_over(X, self.grid).min(axis=1)
        U = self._ucb_over(X, self.contexts)
        if kind == "expected_ucb":
            return U.mean(axis=1)
        u_inf = self._ucb_over(X, self.grid).min(axis=1)
        return robust_values(U, u_inf, self.spec.delta)

    def saa_stderr(self, x) -> float:
        """Standard error of the SAA mean of ucb at ``x``."""
        if self.contexts is None:
            return 0.0
        u = self._ucb_over(np.atleast_2d(x), self.contexts)[0]
        return float(u.std(ddof=1) / math.sqrt(len(u)))


def acq_value(spec: AcquisitionSpec, post, kde, x, stream, c_bounds=None) -> float:
    return float(Acquisition(spec, post, kde, stream, c_bounds)(np.reshape(x, (1, -1)))[0])


@dataclass
class AcqResult:
    x: np.ndarray
    value: float
    raw_best_value: float
    flag: str | None = None
    n_evals: int = 0
    extra: dict = field(default_factory=dict)


def _fd_grad(acq, X, lo, hi, h=FD_STEP):
    """Central differences of ``acq`` for every row of ``X`` at once."""
    G = np.empty_like(X)
    for k in range(X.shape[1]):
        Xp, Xm = X.copy(), X.copy()
        Xp[:, k] = np.minimum(X[:, k] + h, hi[k])
        Xm[:, k] = np.maximum(X[:, k] - h, lo[k])
        G[:, k] = (acq(Xp) - acq(Xm)) / (Xp[:, k] - Xm[:, k])
    return G


def maximize_batch(acq, bounds, raw_samples: int, num_restarts: int, maxiter: int = 200):
    """Sobol raw search followed by a joint L-BFGS-B pass over the restarts.

    Restarts are independent, so maximizing their sum with one L-BFGS-B run
    is equivalent to refining each separately. A restart only moves if its
    refined value improves on its starting value.
    """
    if not raw_samples >= num_restarts >= 1:
        raise ValueError("need raw_samples >= num_restarts >= 1")
    lo, hi = (np.asarray(b, dtype=float) for b in bounds)
    d = len(lo)
    raw = lo + sobol_points(d, raw_samples) * (hi - lo)
    raw_vals = acq(raw)
    top = np.argsort(-raw_vals, kind="stable")[:num_restarts]
    X0, v0 = raw[top], raw_vals[top]
    n_evals = [raw_samples]

    def fun(flat):
        X = np.clip(flat.reshape(-1, d), lo, hi)
        v = acq(X)
        g = _fd_grad(acq, X, lo, hi)
        n_evals[0] += len(X) * (1 + 2 * d)
        if not np.all(np.isfinite(v)) or not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite acquisition value")
        return -float(v.sum()), -g.ravel()

    flag = None
    try:
        res = minimize(fun, X0.ravel(), jac=True, method="L-BFGS-B",
                       bounds=list(zip(np.tile(lo, len(X0)), np.tile(hi, len(X0)))),
                       options={"maxiter": maxiter})
        X1 = np.clip(res.x.reshape(-1, d), lo, hi)
        v1 = acq(X1)
        keep = v1 >= v0
        X1 = np.where(keep[:, None], X1, X0)
        v1 = np.where(keep, v1, v0)
    except (FloatingPointError, ValueError, np.linalg.LinAlgError):
        X1, v1, flag = X0, v0, "refinement-failed"
    best = int(np.argmax(v1))
    return AcqResult(X1[best].copy(), float(v1[best]), float(v0[0]), flag, n_evals[0])


def optimize_acquisition(spec: AcquisitionSpec, post, kde, bounds, raw_samples: int,
                         num_restarts: int, stream, c_bounds=None, maxiter: int = 200):
    acq = Acquisition(spec, post, kde, stream, c_bounds)
    result = maximize_batch(acq, bounds, raw_samples, num_restarts, maxiter)
    result.extra["acquisition"] = acq
    return result
