"""Worst-case expectation over a total-variation ball.

The ball is ``{q : integral |q - p| <= delta}``. Its worst case moves mass
``min(delta / 2, 1)`` from the largest outcomes onto the infimum of the
function over the whole context space. Two routes compute it:
:func:`worst_case_value` does the mass transport directly, while
:func:`solve_dual` maximizes the two-variable dual

    max_{alpha >= 0, alpha + beta >= -u_inf}
        sum_i w_i (-beta - delta * alpha + min(u_i + beta, alpha))

by searching over the cap level ``tau = alpha - beta``, on which the
objective is concave and piecewise linear with kinks at the ``u_i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from kdebo.rng import sobol_points


@dataclass(frozen=True)
class RobustInstance:
    u: np.ndarray
    u_inf: float
    delta: float
    weights: np.ndarray | None = None

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float).ravel()
        object.__setattr__(self, "u", u)
        w = np.full(len(u), 1.0 / len(u)) if self.weights is None else np.asarray(self.weights, float)
        object.__setattr__(self, "weights", w)
        if abs(w.sum() - 1.0) > 1e-12 or np.any(w < 0):
            raise ValueError("weights must be a probability vector")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        if self.u_inf > u.min() + 1e-9:
            raise ValueError("u_inf exceeds the smallest sample value")


@dataclass(frozen=True)
class RobustDualSolution:
    alpha: float
    beta: float
    value: float


def worst_case_value(inst: RobustInstance) -> float:
    """Primal route: strip mass off the top outcomes, park it at ``u_inf``."""
    mass = min(inst.delta / 2.0, 1.0)
    order = np.argsort(-inst.u, kind="stable")
    q = inst.weights.copy()
    left = mass
    for i in order:
        if left <= 0:
            break
        take = min(q[i], left)
        q[i] -= take
        left -= take
    return float(q @ inst.u + (mass - left) * inst.u_inf)


def _best_cap(u_sorted, w_sorted, u_inf, delta):
    """Dual objective at every kink; ``u_sorted`` ascending along the last axis."""
    below = np.cumsum(w_sorted * u_sorted, axis=-1) - w_sorted * u_sorted
    above = np.cumsum(w_sorted[..., ::-1], axis=-1)[..., ::-1]
    g = below + u_sorted * above - 0.5 * delta * (u_sorted - u_inf[..., None])
    return g


def solve_dual(inst: RobustInstance) -> RobustDualSolution:
    order = np.argsort(inst.u, kind="stable")
    us, ws = inst.u[order], inst.weights[order]
    g = _best_cap(us, ws, np.asarray(inst.u_inf), inst.delta)
    k = int(np.argmax(g))
    tau, value = us[k], g[k]
    if inst.u_inf >= value:
        tau, value = inst.u_inf, inst.u_inf
    alpha = max(0.0, 0.5 * (tau - inst.u_inf))
    return RobustDualSolution(alpha=float(alpha), beta=float(alpha - tau), value=float(value))


def robust_values(U, u_inf, delta: float):
    """Batched dual values: one uniform-weight instance per row of ``U``."""
    U = np.atleast_2d(U)
    u_inf = np.minimum(np.asarray(u_inf, dtype=float), U.min(axis=1))
    us = np.sort(U, axis=1)
    ws = np.full_like(us, 1.0 / U.shape[1])
    g = _best_cap(us, ws, u_inf, delta)
    return np.maximum(g.max(axis=1), u_inf)


def context_grid(c_bounds, n_grid: int) -> np.ndarray:
    lo, hi = (np.asarray(b, dtype=float) for b in c_bounds)
    return lo + sobol_points(len(lo), n_grid) * (hi - lo)


def min_ucb_over_grid(post, X, sqrt_beta, grid) -> np.ndarray:
    """``min_c ucb(x, c)`` over ``grid`` for every row of ``X``."""
    X = np.atleast_2d(X)
    B, G = len(X), len(grid)
    Z = np.hstack([np.repeat(X, G, axis=0), np.tile(grid, (B, 1))])
    return post.ucb(Z, sqrt_beta).reshape(B, G).min(axis=1)


def inf_ucb_over_context(post, x, sqrt_beta, n_grid: int, c_bounds) -> float:
    grid = context_grid(c_bounds, n_grid)
    return float(min_ucb_over_grid(post, np.reshape(x, (1, -1)), sqrt_beta, grid)[0])
