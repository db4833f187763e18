"""Time the numba and numpy flavours of each hot kernel, then a short march per backend.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5]

Kernel timings call both flavours in-process (numba is compiled once before
timing).  The march timings run ``facetflow.run_rothe`` in a subprocess with
``FACETFLOW_NUMBA`` set to ``1`` and ``0``.
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from facetflow import kernels

MARCH = """
import time
import numpy as np
from facetflow import ProblemData, build_grid, run_rothe, solve_poisson
g = build_grid(2, [1.0, 1.0], [{cells}, {cells}])
x, y = g.coords
lap = 1.0 + 0.3 * np.sin(np.pi * x) * np.sin(np.pi * y)
b0 = (x * x + y * y) / 4
data = ProblemData(g, b0, lap, 1.0, solve_poisson(-lap, b0, g).values, lap)
run_rothe(data, 0.002, 1)
t0 = time.perf_counter()
run_rothe(data, 0.004, 4)
print(time.perf_counter() - t0)
"""


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    m = 4000
    lower = -rng.uniform(0.5, 1.5, m - 1)
    diag = 3.0 + rng.uniform(0, 1, m)
    rhs = rng.normal(size=m)
    yield "tridiag_solve m=4000", (lambda f: f(lower, diag, lower, rhs)), "tridiag_solve"

    nx = ny = 128
    ex = np.exp(rng.normal(scale=0.3, size=(nx, ny + 1)))
    ey = np.exp(rng.normal(scale=0.3, size=(nx + 1, ny)))
    h2 = (1.0 / nx) ** 2
    v = rng.normal(size=(nx - 1, ny - 1))
    yield "apply_5pt 128x128", (lambda f: f(ex, ey, 0.5, h2, h2, v)), "apply_5pt"
    zero = np.zeros_like(v)
    yield ("cg_5pt 128x128 tol=1e-10",
           (lambda f: f(ex, ey, 0.5, h2, h2, v, zero, 1e-10, 1.0, 0.0, 5000, True)), "cg_5pt")

    n = 3000
    x, t, fv = rng.uniform(size=n), rng.uniform(size=n), rng.normal(size=n)
    yield "holder_sup n=3000", (lambda f: f(x, t, fv, 0.5, 0.25)), "holder_sup"


def march_time(flag, cells):
    env = dict(os.environ, FACETFLOW_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", MARCH.format(cells=cells)], env=env,
                         capture_output=True, text=True, check=True)
    return float(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--cells", type=int, default=24, help="cells per side of the 2D march")
    args = p.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'numba [ms]':>12s} {'numpy [ms]':>12s} {'speedup':>8s}")
    for label, call, name in cases(rng):
        nb = getattr(kernels, f"{name}_numba")
        npf = getattr(kernels, f"{name}_numpy")
        call(nb)  # compile
        t_nb = best_of(lambda: call(nb), args.repeat)
        t_np = best_of(lambda: call(npf), args.repeat)
        print(f"{label:32s} {1e3 * t_nb:12.3f} {1e3 * t_np:12.3f} {t_np / t_nb:8.1f}")
    t_nb, t_np = march_time("1", args.cells), march_time("0", args.cells)
    label = f"march 2D {args.cells}x{args.cells}, 4 steps"
    print(f"{label:32s} {1e3 * t_nb:12.3f} {1e3 * t_np:12.3f} {t_np / t_nb:8.1f}")


if __name__ == "__main__":
    main()
