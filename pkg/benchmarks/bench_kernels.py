"""Compare the numba and numpy kernel backends on the paper SIR grid.

Each backend runs in its own interpreter (the backend is fixed at import
time by EPICON_BACKEND).  Compilation is excluded via a warm-up call.

    python3 benchmarks/bench_kernels.py [--grid N] [--repeat R]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from epicon import kernels, preset
from epicon.solver import _Problem

N, repeat = int(sys.argv[1]), int(sys.argv[2])
sc = preset("sir_paper_qq_008").replace(grid_points=N)
p = _Problem(sc)
u = np.full((N + 1, 1), 0.03)
Y = p.forward(u)
cases = {
    "rk4_forward": lambda: kernels.rk4_forward(p.y0, u, p.h, p.M, p.sigma, p.mu, p.rho, p.beta),
    "rk4_adjoint": lambda: kernels.rk4_adjoint(Y, u, p.h, p.M, p.sigma, p.rho, p.beta, p.w, p.rexp),
    "discrete_cost_gradient": lambda: kernels.discrete_cost_gradient(
        Y, u, p.h, p.M, p.sigma, p.mu, p.rho, p.beta, p.w, p.rexp, p.C, p.q),
}
bounds = np.array([0, N // 3, 2 * N // 3], dtype=np.int64)
vals = np.linspace(0.0, 0.08, 4)[None, :]
cases["exhaustive_piecewise(3x4)"] = lambda: kernels.exhaustive_piecewise(
    p.y0, p.h, N, bounds, vals, p.M, p.sigma, p.mu, p.rho, p.beta, p.w, p.rexp, p.C, p.q)
out = {"backend": kernels.BACKEND}
for name, fn in cases.items():
    fn()
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    out[name] = float(np.median(times))
print(json.dumps(out))
"""


def run_backend(backend, grid, repeat):
    env = dict(os.environ, EPICON_BACKEND=backend)
    res = subprocess.run([sys.executable, "-c", WORKER, str(grid), str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=3600)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    fast = run_backend("numba", args.grid, args.repeat)
    slow = run_backend("numpy", args.grid, args.repeat)
    print(f"grid N = {args.grid}, median of {args.repeat} runs (backends: {fast['backend']} vs {slow['backend']})")
    print(f"{'kernel':28s} {'numba [ms]':>12s} {'numpy [ms]':>12s} {'speedup':>9s}")
    for key in fast:
        if key == "backend":
            continue
        a, b = fast[key] * 1e3, slow[key] * 1e3
        print(f"{key:28s} {a:12.3f} {b:12.3f} {b / a:8.1f}x")


if __name__ == "__main__":
    main()
