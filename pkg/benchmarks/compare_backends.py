"""Compare the numba-compiled kernels against the pure-numpy fallback.

The backend is fixed at import time by SICEREP_BACKEND, so this script
re-invokes itself in a subprocess per backend and reports wall-clock times
for the three hot kernels: the penalized-estimation column solver, the SVM
dual, and the enclosing-sphere QP.

Usage:  python benchmarks/compare_backends.py
"""

import json
import os
import subprocess
import sys
import time


def run_workload():
    import numpy as np

    import sicerep
    from sicerep.glasso import glasso_solve
    from sicerep.svm import solve_radius, solve_svm_l2

    rng = np.random.default_rng(0)
    timings = {"backend": sicerep.BACKEND}

    # penalized estimation at d=60, warm pass first to absorb jit compilation
    a = rng.standard_normal((60, 120))
    sig = a @ a.T / 120
    off = np.abs(sig - np.diag(np.diag(sig)))
    lam = 0.2 * off.max()
    glasso_solve(sig, lam, tol=1e-6)
    t0 = time.perf_counter()
    for _ in range(3):
        glasso_solve(sig, lam, tol=1e-6)
    timings["glasso_d60"] = (time.perf_counter() - t0) / 3

    # SVM dual and radius QP at n=120
    b = rng.standard_normal((120, 40))
    g = b @ b.T / 40
    d = np.sqrt(np.diag(g))
    g = g / np.outer(d, d)
    y = np.where(rng.random(120) < 0.5, 1.0, -1.0)
    y[0] = 1.0
    y[1] = -1.0
    solve_svm_l2(g, y, 10.0, tol=1e-8)
    t0 = time.perf_counter()
    for _ in range(5):
        solve_svm_l2(g, y, 10.0, tol=1e-8)
    timings["svm_n120"] = (time.perf_counter() - t0) / 5

    solve_radius(g, tol=1e-8)
    t0 = time.perf_counter()
    for _ in range(5):
        solve_radius(g, tol=1e-8)
    timings["radius_n120"] = (time.perf_counter() - t0) / 5

    print(json.dumps(timings))


def main():
    results = {}
    for backend in ("numba", "numpy"):
        env = dict(os.environ, SICEREP_BACKEND=backend)
        out = subprocess.run(
            [sys.executable, __file__, "--workload"],
            env=env, capture_output=True, text=True, check=True)
        results[backend] = json.loads(out.stdout.strip().splitlines()[-1])

    kernels = [k for k in results["numba"] if k != "backend"]
    width = max(len(k) for k in kernels)
    print(f"{'kernel'.ljust(width)}  {'numba':>10}  {'numpy':>10}  speedup")
    for k in kernels:
        tn = results["numba"][k]
        tp = results["numpy"][k]
        print(f"{k.ljust(width)}  {tn * 1000:>8.1f}ms  {tp * 1000:>8.1f}ms  "
              f"{tp / tn:>6.1f}x")


if __name__ == "__main__":
    if "--workload" in sys.argv:
        run_workload()
    else:
        main()
