"""Compare the numba and numpy variants of the hot kernels.

Usage::

    python benchmarks/bench_kernels.py            # kernel micro-benchmarks
    python benchmarks/bench_kernels.py --e2e      # also a short BO run per backend

The end-to-end mode launches one subprocess per backend with ``KDEBO_NUMBA``
set, so the dispatch in :mod:`kdebo.kernels` is exercised as users see it.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from kdebo import kernels
from kdebo.rng import _direction_numbers

E2E_SNIPPET = """
import time
from kdebo.loop import RunConfig, run
ov = {"m_samples": 128, "raw_samples": 128, "num_restarts": 5, "n_inf_grid": 128, "maxiter": 50}
run(RunConfig("ackley", "sbo_kde", T=8, n0=6, overrides=ov))  # warm caches
t = time.perf_counter()
run(RunConfig("ackley", "sbo_kde", T=30, n0=6, overrides=ov))
print(time.perf_counter() - t)
"""


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def cases(rng):
    X = rng.uniform(size=(100, 3))
    Z = rng.uniform(size=(8192, 3))
    ls = np.array([0.3, 0.5, 0.2])
    S = rng.uniform(size=(300, 1))
    P = rng.uniform(size=(8192, 1))
    h = np.array([0.05])
    V = _direction_numbers(8)
    return [
        ("matern52 8192x100x3", lambda f: f(Z, X, ls, 1.3), "matern52"),
        ("gauss_kde 8192 pts, 300 atoms", lambda f: f(P, S, h), "gauss_kde"),
        ("sobol_ints 2^16 x 8", lambda f: f(V, 1 << 16), "sobol_ints"),
    ]


def bench_kernels(repeat):
    rng = np.random.default_rng(0)
    print(f"{'kernel':34s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s} {'max |diff|':>11s}")
    for label, call, name in cases(rng):
        f_np = getattr(kernels, name + "_numpy")
        f_nb = getattr(kernels, name + "_numba")
        a, b = call(f_np), call(f_nb)  # second call also triggers compilation
        diff = float(np.max(np.abs(a.astype(float) - b.astype(float))))
        t_np = _best(lambda: call(f_np), repeat)
        t_nb = _best(lambda: call(f_nb), repeat)
        print(f"{label:34s} {1e3 * t_np:10.2f} {1e3 * t_nb:10.2f} {t_np / t_nb:8.2f} {diff:11.2e}")


def bench_e2e():
    for flag in ("1", "0"):
        env = dict(os.environ, KDEBO_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", E2E_SNIPPET], env=env,
                             capture_output=True, text=True, check=True)
        backend = "numba" if flag == "1" else "numpy"
        print(f"sbo_kde ackley T=30, {backend:5s}: {float(res.stdout.split()[-1]):.2f} s")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--e2e", action="store_true")
    args = ap.parse_args()
    bench_kernels(args.repeat)
    if args.e2e:
        bench_e2e()


if __name__ == "__main__":
    main()
