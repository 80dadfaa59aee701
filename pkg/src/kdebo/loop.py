"""Sequential optimization loops: SBO-KDE, DRBO-KDE, GP-UCB and StableOpt."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from kdebo.acquisition import AcquisitionSpec, Schedules, beta_schedule, optimize_acquisition
from kdebo.gp import NumericalError, fit_gp
from kdebo.kde import KdeModel
from kdebo.problems import get_problem, observe
from kdebo.rng import SeedStream, sobol_points

log = logging.getLogger(__name__)

ALGORITHMS = ("sbo_kde", "drbo_kde", "gp_ucb", "stable_opt")
ACQ_KIND = {
    "sbo_kde": "expected_ucb",
    "drbo_kde": "robust_ucb",
    "gp_ucb": "plain_ucb",
    "stable_opt": "stable_ucb",
}
REFIT_EVERY_AFTER = 50
REFIT_PERIOD = 5


def default_acq_settings(algorithm: str) -> dict:
    slow = algorithm == "drbo_kde"
    return {
        "m_samples": 1024,
        "raw_samples": 32 if slow else 1024,
        "num_restarts": 5 if slow else 50,
        "n_inf_grid": 1024,
        "n_stable_grid": 1024,
        "maxiter": 200,
    }


@dataclass
class RunConfig:
    problem: str
    algorithm: str
    T: int
    seed: int = 100
    n0: int | None = None
    schedules: Schedules = field(default_factory=Schedules)
    overrides: dict = field(default_factory=dict)
    noise_sigma: float = 0.0
    gp_restarts: int = 5

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.n0 is None:
            p = get_problem(self.problem)
            self.n0 = 2 * (p.dx + p.dc)
        if not 1 <= self.n0 <= self.T:
            raise ValueError("need 1 <= n0 <= T")
        unknown = set(self.overrides) - set(default_acq_settings(self.algorithm))
        if unknown:
            raise ValueError(f"unknown acquisition overrides: {sorted(unknown)}")

    def acq_settings(self) -> dict:
        return {**default_acq_settings(self.algorithm), **self.overrides}


@dataclass
class IterRecord:
    t: int
    phase: str
    x: np.ndarray
    c: np.ndarray
    y: float
    acq_value: float = math.nan
    wall_ms: float = 0.0
    delta: float | None = None
    sqrt_beta: float | None = None


@dataclass
class RunTrace:
    config: RunConfig
    records: list = field(default_factory=list)
    error: str | None = None

    @property
    def X(self):
        return np.array([r.x for r in self.records])

    @property
    def C(self):
        return np.array([r.c for r in self.records])

    @property
    def y(self):
        return np.array([r.y for r in self.records])

    def config_dict(self):
        d = asdict(self.config)
        d["schedules"] = {"beta_mode": list(self.config.schedules.beta_mode),
                          "delta_mode": list(self.config.schedules.delta_mode)}
        return d


def _stable_box(C, c_bounds):
    mu = C.mean(axis=0)
    sd = C.std(axis=0, ddof=1) if len(C) > 1 else np.zeros(C.shape[1])
    lo = np.clip(mu - sd, *c_bounds)
    hi = np.clip(mu + sd, *c_bounds)
    return (lo, hi)


def _gp_hyper_due(t):
    return t <= REFIT_EVERY_AFTER or t % REFIT_PERIOD == 0


def run(config: RunConfig) -> RunTrace:
    """Execute one optimization run; deterministic given ``config``."""
    problem = get_problem(config.problem, config.noise_sigma)
    settings = config.acq_settings()
    dx, dc = problem.dx, problem.dc
    x_lo, x_hi = problem.x_bounds
    c_lo, c_hi = problem.c_bounds
    joint_bounds = (np.concatenate([x_lo, c_lo]), np.concatenate([x_hi, c_hi]))

    root = SeedStream(config.seed)
    env = root.child("env")
    noise = root.child("noise")
    trace = RunTrace(config)

    # Sobol over the joint box; the environment supplies the contexts
    init = sobol_points(dx + dc, config.n0)[:, :dx]
    for i, u in enumerate(init, start=1):
        t0 = time.perf_counter()
        x = x_lo + u * (x_hi - x_lo)
        c = problem.dist.sample(env, 1)[0]
        y = float(observe(problem, x, c, noise))
        trace.records.append(IterRecord(i, "init", x, c, y,
                                        wall_ms=1e3 * (time.perf_counter() - t0)))

    hyper = None
    kind = ACQ_KIND[config.algorithm]
    for t in range(config.n0 + 1, config.T + 1):
        t0 = time.perf_counter()
        X, C, Y = trace.X, trace.C, trace.y
        fit_stream = root.child("gpfit").child(t)
        try:
            if kind == "plain_ucb":
                inputs, bounds = X, problem.x_bounds
            else:
                inputs, bounds = np.hstack([X, C]), joint_bounds
            refit = hyper is None or _gp_hyper_due(t)
            post = fit_gp(inputs, Y, bounds, fit_stream, config.gp_restarts,
                          hyper=None if refit else hyper)
            hyper = post.hyper

            sqrt_beta = beta_schedule(config.schedules, t)
            delta = None
            kde = None
            extra = {}
            if kind in ("expected_ucb", "robust_ucb"):
                kde = KdeModel.fit(C, problem.c_bounds)
            if kind == "robust_ucb":
                delta = config.schedules.delta(t - 1, dc)
                extra = {"delta": delta, "n_inf_grid": settings["n_inf_grid"]}
            elif kind == "stable_ucb":
                extra = {"stable_box": _stable_box(C, problem.c_bounds),
                         "n_stable_grid": settings["n_stable_grid"]}
            spec = AcquisitionSpec(kind, sqrt_beta=sqrt_beta,
                                   m_samples=settings["m_samples"], **extra)
            res = optimize_acquisition(spec, post, kde, problem.x_bounds,
                                       settings["raw_samples"], settings["num_restarts"],
                                       root.child("saa").child(t), problem.c_bounds,
                                       settings["maxiter"])
        except NumericalError as exc:
            trace.error = f"iteration {t}: {exc}"
            log.error("run %s/%s seed %d aborted: %s", config.problem,
                      config.algorithm, config.seed, exc)
            break
        if res.flag:
            log.warning("iteration %d: %s", t, res.flag)
        x = res.x
        c = problem.dist.sample(env, 1)[0]
        y = float(observe(problem, x, c, noise))
        trace.records.append(IterRecord(t, "bo", x, c, y, res.value,
                                        1e3 * (time.perf_counter() - t0), delta, sqrt_beta))
    return trace
