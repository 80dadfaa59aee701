"""Ground truth, regret, TV discrepancy and cross-seed aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from kdebo.kde import KdeModel
from kdebo.problems import Problem, get_problem
from kdebo.rng import SeedStream, UnsupportedDistributionError, qmc_context_samples, sobol_points

DEFAULT_QMC_EXPONENT = 16


def context_cache(problem: Problem, N: int, seed: int = 0) -> np.ndarray:
    """QMC contexts for ``problem``; seeded Monte Carlo when no quantile exists."""
    try:
        return qmc_context_samples(problem.dist, N)
    except UnsupportedDistributionError:
        return problem.dist.sample(SeedStream(seed).child("mc-fallback"), N)


def expectation_qmc(problem: Problem, x, N: int = 1 << DEFAULT_QMC_EXPONENT, contexts=None) -> float:
    C = context_cache(problem, N) if contexts is None else contexts
    X = np.broadcast_to(np.asarray(x, dtype=float).reshape(1, -1), (len(C), problem.dx))
    return float(np.mean(problem(X, C)))


@dataclass
class GroundTruth:
    problem: str
    x_star: np.ndarray
    F_star: float
    N: int
    stderr: float = 0.0
    contexts: np.ndarray | None = None

    def to_dict(self):
        return {"problem": self.problem, "x_star": [float(v) for v in self.x_star],
                "F_star": self.F_star, "N": self.N, "stderr": self.stderr}

    @classmethod
    def from_dict(cls, d, contexts=None):
        return cls(d["problem"], np.asarray(d["x_star"]), float(d["F_star"]), int(d["N"]),
                   float(d.get("stderr", 0.0)), contexts)


def find_optimum(problem: Problem | str, N: int = 1 << DEFAULT_QMC_EXPONENT, restarts: int = 10,
                 stream: SeedStream | None = None, raw: int = 256) -> GroundTruth:
    """Multi-start L-BFGS-B on the QMC estimate of the expected objective."""
    if isinstance(problem, str):
        problem = get_problem(problem)
    stream = stream or SeedStream(0)
    C = context_cache(problem, N)
    lo, hi = problem.x_bounds

    def F(x):
        return expectation_qmc(problem, np.clip(x, lo, hi), contexts=C)

    def neg_and_grad(x, h=1e-5):
        x = np.clip(x, lo, hi)
        g = np.empty_like(x)
        for k in range(len(x)):
            xp, xm = x.copy(), x.copy()
            xp[k] = min(x[k] + h, hi[k])
            xm[k] = max(x[k] - h, lo[k])
            g[k] = (F(xp) - F(xm)) / (xp[k] - xm[k])
        return -F(x), -g

    cand = lo + sobol_points(problem.dx, raw) * (hi - lo)
    vals = np.array([F(x) for x in cand])
    starts = list(cand[np.argsort(-vals)[:max(restarts // 2, 1)]])
    starts += list(lo + stream.uniform(size=(restarts - len(starts), problem.dx)) * (hi - lo))
    best_x, best_v = cand[int(np.argmax(vals))], float(vals.max())
    for x0 in starts:
        res = minimize(neg_and_grad, x0, jac=True, method="L-BFGS-B",
                       bounds=list(zip(lo, hi)), options={"maxiter": 500})
        v = F(res.x)
        if v > best_v:
            best_x, best_v = np.clip(res.x, lo, hi), v
    X = np.broadcast_to(best_x, (len(C), problem.dx))
    se = float(np.std(problem(X, C), ddof=1) / math.sqrt(len(C)))
    return GroundTruth(problem.name, best_x, best_v, N, se, C)


@dataclass
class RegretCurve:
    seed: int
    inst: np.ndarray
    cum: np.ndarray


def regret_curve(trace_x, gt: GroundTruth, problem: Problem, seed: int = 0) -> RegretCurve:
    """Instantaneous and cumulative regret of the queried decisions."""
    C = gt.contexts if gt.contexts is not None else context_cache(problem, gt.N)
    F = np.array([expectation_qmc(problem, x, contexts=C) for x in np.atleast_2d(trace_x)])
    inst = gt.F_star - F
    return RegretCurve(seed, inst, np.cumsum(inst))


def reward_curve(trace_x, trace_c, problem: Problem, seed: int = 0) -> RegretCurve:
    """Observed (noise-free) reward per step and its running sum."""
    r = problem(np.atleast_2d(trace_x), np.atleast_2d(trace_c))
    return RegretCurve(seed, r, np.cumsum(r))


def tv_discrepancy(kde: KdeModel, dist, grid_n: int = 10_000) -> float:
    """l1 distance between the KDE and the true density over the context box."""
    if kde.dim != 1:
        raise ValueError("TV diagnostic supports scalar contexts only")
    lo, hi = (float(np.ravel(b)[0]) for b in dist.box)
    grid = np.linspace(lo, hi, grid_n)[:, None]
    return float(np.trapezoid(np.abs(kde.density(grid) - dist.pdf(grid)), grid[:, 0]))


def tv_experiment(problem: Problem | str, sample_sizes, seeds, grid_n: int = 10_000):
    """Mean and standard error of the KDE's TV error per sample size."""
    if isinstance(problem, str):
        problem = get_problem(problem)
    out = {}
    for t in sample_sizes:
        vals = []
        for s in seeds:
            C = problem.dist.sample(SeedStream(s).child("tv").child(int(t)), int(t))
            vals.append(tv_discrepancy(KdeModel.fit(C, problem.c_bounds), problem.dist, grid_n))
        vals = np.array(vals)
        se = vals.std(ddof=1) / math.sqrt(len(vals)) if len(vals) > 1 else 0.0
        out[int(t)] = (float(vals.mean()), float(se))
    return out


def aggregate(curves):
    """Pointwise mean and standard error (sample sd / sqrt(n)) across seeds."""
    if not curves:
        raise ValueError("aggregate needs at least one curve")
    A = np.array([c.cum if isinstance(c, RegretCurve) else np.asarray(c) for c in curves], float)
    if len(A) == 1:
        return A[0].copy(), np.zeros(A.shape[1])
    return A.mean(axis=0), A.std(axis=0, ddof=1) / math.sqrt(len(A))
