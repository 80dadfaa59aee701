"""``bench`` command line: run benchmark grids, compute regret, aggregate.

Layout of a results directory::

    manifest.json                      config echo, per-cell status and timings
    traces/<problem>__<algo>__seed<k>.csv
    groundtruth/<problem>.json
    regret/<problem>__<algo>__seed<k>.csv
    aggregate/<problem>.csv
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import subprocess
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from kdebo import __version__
from kdebo.acquisition import Schedules
from kdebo.loop import ALGORITHMS, RunConfig, default_acq_settings, run
from kdebo.metrics import (GroundTruth, aggregate, context_cache, find_optimum,
                           regret_curve, reward_curve, tv_experiment)
from kdebo.problems import get_problem, problem_names

log = logging.getLogger("kdebo.bench")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3
DEFAULT_SEEDS = (100, 101, 102, 103, 104)
REWARD_ONLY = ("hartmann-complicated",)


class ValidationError(ValueError):
    pass


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    return repr(float(v))


@dataclass
class BenchmarkConfig:
    problems: list
    algorithms: list
    seeds: list = field(default_factory=lambda: list(DEFAULT_SEEDS))
    T: int = 100
    n0: int | None = None
    qmc_exponent: int = 16
    metric: str = "regret"
    output_dir: str = "results"
    parallelism: int = 1
    noise_sigma: float = 0.0
    acquisition: dict = field(default_factory=dict)
    beta: dict = field(default_factory=lambda: {"mode": "fixed", "sqrt_beta": 1.5})
    delta: dict = field(default_factory=lambda: {"mode": "schedule"})
    timing_in_trace: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> BenchmarkConfig:
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown config field(s): {', '.join(sorted(extra))}")
        for key in ("problems", "algorithms"):
            if key not in d:
                raise ValidationError(f"missing required field '{key}'")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self):
        for key in ("problems", "algorithms", "seeds"):
            val = getattr(self, key)
            if not isinstance(val, list) or not val:
                raise ValidationError(f"field '{key}' must be a non-empty list")
        for p in self.problems:
            if p not in problem_names():
                raise ValidationError(f"field 'problems': unknown problem {p!r}")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ValidationError(f"field 'algorithms': unknown algorithm {a!r}")
        for s in self.seeds:
            if not isinstance(s, int) or not 0 <= s < 2**64:
                raise ValidationError(f"field 'seeds': {s!r} is not a 64-bit unsigned int")
        if not isinstance(self.T, int) or self.T < 1:
            raise ValidationError("field 'T' must be a positive integer")
        if self.n0 is not None and not (isinstance(self.n0, int) and 1 <= self.n0 < self.T):
            raise ValidationError("field 'n0' must satisfy 1 <= n0 < T")
        if self.metric not in ("regret", "reward"):
            raise ValidationError("field 'metric' must be 'regret' or 'reward'")
        if not isinstance(self.parallelism, int) or self.parallelism < 1:
            raise ValidationError("field 'parallelism' must be a positive integer")
        bad = set(self.acquisition) - set(default_acq_settings("sbo_kde"))
        if bad:
            raise ValidationError(f"field 'acquisition': unknown key(s) {sorted(bad)}")
        try:
            self.schedules()
        except (ValueError, KeyError, TypeError) as exc:
            raise ValidationError(f"field 'beta'/'delta': {exc}") from None

    def schedules(self) -> Schedules:
        b = self.beta
        if b.get("mode", "fixed") == "fixed":
            beta_mode = ("fixed", float(b.get("sqrt_beta", 1.5)))
        else:
            beta_mode = ("theoretical", float(b["a"]), float(b["b"]), float(b["r"]))
        d = self.delta
        mode = d.get("mode", "schedule")
        if mode not in ("schedule", "fixed"):
            raise ValueError(f"unknown delta mode {mode!r}")
        delta_mode = ("schedule",) if mode == "schedule" else ("fixed", float(d["value"]))
        return Schedules(beta_mode, delta_mode)

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def load_config(path) -> BenchmarkConfig:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ValidationError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object")
    return BenchmarkConfig.from_dict(data)


def cell_id(problem, algorithm, seed) -> str:
    return f"{problem}__{algorithm}__seed{seed}"


def _run_config(cfg: BenchmarkConfig, problem, algorithm, seed) -> RunConfig:
    sched = cfg.schedules()
    if sched.beta_mode[0] == "theoretical":
        sched = Schedules(sched.beta_mode + (get_problem(problem).dx,), sched.delta_mode)
    return RunConfig(problem, algorithm, cfg.T, seed, cfg.n0, sched,
                     dict(cfg.acquisition), cfg.noise_sigma)


def trace_header(dx, dc):
    return (["seed", "iter", "phase"] + [f"x_{i}" for i in range(dx)]
            + [f"c_{i}" for i in range(dc)] + ["y", "acq_value", "wall_ms"])


def write_trace(path: Path, trace, timing_inline: bool):
    p = get_problem(trace.config.problem)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_header(p.dx, p.dc))
        for r in trace.records:
            w.writerow([trace.config.seed, r.t, r.phase] + [_fmt(v) for v in r.x]
                       + [_fmt(v) for v in r.c] + [_fmt(r.y), _fmt(r.acq_value),
                                                   f"{r.wall_ms:.3f}" if timing_inline else ""])


def read_trace(path: Path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    xs = sorted((k for k in rows[0] if k.startswith("x_")), key=lambda k: int(k[2:]))
    cs = sorted((k for k in rows[0] if k.startswith("c_")), key=lambda k: int(k[2:]))
    X = np.array([[float(r[k]) for k in xs] for r in rows])
    C = np.array([[float(r[k]) for k in cs] for r in rows])
    return rows, X, C


def _execute_cell(args):
    cfg_dict, problem, algorithm, seed, out_dir = args
    cfg = BenchmarkConfig.from_dict(cfg_dict)
    cid = cell_id(problem, algorithm, seed)
    t0 = time.perf_counter()
    try:
        trace = run(_run_config(cfg, problem, algorithm, seed))
    except Exception as exc:  # recorded per cell, never aborts the grid
        return cid, {"status": "error", "error": f"{type(exc).__name__}: {exc}"}
    path = Path(out_dir) / "traces" / f"{cid}.csv"
    write_trace(path, trace, cfg.timing_in_trace)
    info = {
        "status": "error" if trace.error else "ok",
        "trace": str(path.relative_to(out_dir)),
        "n_records": len(trace.records),
        "wall_ms": [round(r.wall_ms, 3) for r in trace.records],
        "total_wall_s": round(time.perf_counter() - t0, 3),
        "finished": _dt.datetime.now().isoformat(timespec="seconds"),
    }
    if trace.error:
        info["error"] = trace.error
    return cid, info


def version_string() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             capture_output=True, text=True, timeout=5,
                             cwd=Path(__file__).resolve().parent)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _read_manifest(out: Path) -> dict:
    path = out / "manifest.json"
    if path.exists():
        return json.loads(path.read_text())
    return {}


def _write_manifest(out: Path, manifest: dict):
    tmp = out / "manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    tmp.replace(out / "manifest.json")


def cmd_run(config_path, force=False, jobs=None) -> int:
    try:
        cfg = load_config(config_path)
    except ValidationError as exc:
        log.error("validation error: %s", exc)
        return EXIT_VALIDATION
    out = Path(cfg.output_dir)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    manifest = _read_manifest(out)
    cells = manifest.get("cells", {})
    todo = []
    for problem in cfg.problems:
        for algorithm in cfg.algorithms:
            for seed in cfg.seeds:
                cid = cell_id(problem, algorithm, seed)
                done = cells.get(cid, {}).get("status") == "ok" and (out / "traces" / f"{cid}.csv").exists()
                if done and not force:
                    continue
                todo.append((cfg.to_dict(), problem, algorithm, seed, str(out)))
    manifest.update({"version": version_string(), "config": cfg.to_dict(),
                     "updated": _dt.datetime.now().isoformat(timespec="seconds")})
    manifest.setdefault("created", manifest["updated"])
    manifest["cells"] = cells
    log.info("%d cell(s) to run, %d already complete", len(todo),
             len(cfg.problems) * len(cfg.algorithms) * len(cfg.seeds) - len(todo))
    workers = jobs or cfg.parallelism
    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for cid, info in pool.map(_execute_cell, todo):
                cells[cid] = info
                _write_manifest(out, manifest)
    else:
        for args in todo:
            cid, info = _execute_cell(args)
            log.info("%s: %s (%.1fs)", cid, info["status"], info.get("total_wall_s", 0.0))
            cells[cid] = info
            _write_manifest(out, manifest)
    _write_manifest(out, manifest)
    failed = [cid for cid, info in cells.items() if info.get("status") != "ok"]
    if failed:
        log.error("failed cells: %s", ", ".join(sorted(failed)))
        return EXIT_RUNTIME
    return EXIT_OK


def _expected_cells(cfg: BenchmarkConfig):
    return [(p, a, s) for p in cfg.problems for a in cfg.algorithms for s in cfg.seeds]


def _load_results(results_dir):
    out = Path(results_dir)
    manifest = _read_manifest(out)
    if "config" not in manifest:
        raise ValidationError(f"{out} has no manifest.json; run `bench run` first")
    cfg = BenchmarkConfig.from_dict(manifest["config"])
    missing = [cell_id(*c) for c in _expected_cells(cfg)
               if not (out / "traces" / f"{cell_id(*c)}.csv").exists()]
    if missing:
        raise ValidationError("missing traces for: " + ", ".join(missing)
                              + f"; rerun `bench run --config <file>` for {out}")
    return out, cfg


def ground_truth(out: Path, problem: str, N: int) -> GroundTruth:
    path = out / "groundtruth" / f"{problem}.json"
    p = get_problem(problem)
    if path.exists():
        d = json.loads(path.read_text())
        if d["N"] == N:
            return GroundTruth.from_dict(d, context_cache(p, N))
    gt = find_optimum(p, N)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(gt.to_dict(), indent=2))
    return gt


def cmd_regret(results_dir) -> int:
    try:
        out, cfg = _load_results(results_dir)
    except ValidationError as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    (out / "regret").mkdir(exist_ok=True)
    N = 1 << cfg.qmc_exponent
    for problem in cfg.problems:
        p = get_problem(problem)
        reward = cfg.metric == "reward" or problem in REWARD_ONLY
        gt = None if reward else ground_truth(out, problem, N)
        for algorithm in cfg.algorithms:
            for seed in cfg.seeds:
                cid = cell_id(problem, algorithm, seed)
                _, X, C = read_trace(out / "traces" / f"{cid}.csv")
                if reward:
                    curve, cols = reward_curve(X, C, p, seed), ["inst_reward", "cum_reward"]
                else:
                    curve, cols = regret_curve(X, gt, p, seed), ["inst_regret", "cum_regret"]
                with open(out / "regret" / f"{cid}.csv", "w", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(["seed", "iter"] + cols)
                    for i, (r, R) in enumerate(zip(curve.inst, curve.cum), start=1):
                        w.writerow([seed, i, _fmt(r), _fmt(R)])
        log.info("regret written for %s", problem)
    return EXIT_OK


def read_regret(path: Path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([float(r[3]) for r in rows[1:]])


def cmd_aggregate(results_dir) -> int:
    try:
        out, cfg = _load_results(results_dir)
    except ValidationError as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    missing = [cell_id(*c) for c in _expected_cells(cfg)
               if not (out / "regret" / f"{cell_id(*c)}.csv").exists()]
    if missing:
        log.error("missing regret files for: %s; run `bench regret --dir %s` first",
                  ", ".join(missing), out)
        return EXIT_VALIDATION
    (out / "aggregate").mkdir(exist_ok=True)
    for problem in cfg.problems:
        with open(out / "aggregate" / f"{problem}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["algorithm", "iter", "mean", "stderr", "n_seeds"])
            for algorithm in cfg.algorithms:
                curves = [read_regret(out / "regret" / f"{cell_id(problem, algorithm, s)}.csv")
                          for s in cfg.seeds]
                mean, se = aggregate(curves)
                for i, (m, s) in enumerate(zip(mean, se), start=1):
                    w.writerow([algorithm, i, _fmt(m), _fmt(s), len(curves)])
    return EXIT_OK


def cmd_tv(problem, samples, seeds, grid_n=10_000, out=None) -> int:
    if problem not in problem_names():
        log.error("unknown problem %r", problem)
        return EXIT_VALIDATION
    if get_problem(problem).dc != 1:
        log.error("TV diagnostic needs a scalar context; %s has D_c > 1", problem)
        return EXIT_VALIDATION
    res = tv_experiment(problem, samples, range(seeds), grid_n)
    lines = ["samples,mean_tv,stderr,n_seeds"]
    lines += [f"{t},{m:.6f},{s:.6f},{seeds}" for t, (m, s) in res.items()]
    text = "\n".join(lines) + "\n"
    if out:
        Path(out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def _int_list(s):
    try:
        return [int(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def build_parser():
    ap = argparse.ArgumentParser(prog="bench", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run every (problem, algorithm, seed) cell")
    r.add_argument("--config", required=True)
    r.add_argument("--force", action="store_true", help="recompute completed cells")
    r.add_argument("--jobs", type=int, default=None, help="max concurrent runs")
    g = sub.add_parser("regret", help="per-seed regret (or reward) CSVs")
    g.add_argument("--dir", required=True)
    a = sub.add_parser("aggregate", help="mean and standard error across seeds")
    a.add_argument("--dir", required=True)
    t = sub.add_parser("tv", help="TV distance between KDE and the true context density")
    t.add_argument("--problem", required=True)
    t.add_argument("--samples", type=_int_list, default=[10, 100, 200, 300])
    t.add_argument("--seeds", type=int, default=20)
    t.add_argument("--grid", type=int, default=10_000)
    t.add_argument("--out", default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return cmd_run(args.config, args.force, args.jobs)
    if args.command == "regret":
        return cmd_regret(args.dir)
    if args.command == "aggregate":
        return cmd_aggregate(args.dir)
    return cmd_tv(args.problem, args.samples, args.seeds, args.grid, args.out)


if __name__ == "__main__":
    sys.exit(main())
