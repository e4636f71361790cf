"""Time the compiled simplex kernel against the pure-Python fallback.

    python benchmarks/bench_simplex.py [--repeat 3]

Both backends solve the same LPs; objective values are cross-checked.
"""
import argparse
import time

import numpy as np

from sfpump.instance import generate, relaxation
from sfpump.lp import core, project_l1, solve_lp
from sfpump.lp import _kernel_py

try:
    from sfpump.lp import _kernel as _kernel_c
except ImportError:
    _kernel_c = None


def workloads():
    rng = np.random.default_rng(0)
    out = {}
    for n, m in ((5, 6), (9, 18), (30, 40)):
        insts = [generate(s, n, m) for s in range(40)]
        out[f"relaxation {n}x{m}"] = [lambda i=i: solve_lp(relaxation(i)) for i in insts]
        anchors = [rng.integers(-20, 21, n).astype(float) for _ in insts]
        out[f"L1 projection {n}x{m}"] = [
            lambda i=i, a=a: project_l1(i.A, i.b, i.lower, i.upper, a) for i, a in zip(insts, anchors)]
    return out


def run(jobs, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        results = [job() for job in jobs]
        best = min(best, time.perf_counter() - t0)
    return best, results


def signature(results):
    return [r.objective_value if hasattr(r, "objective_value") else float(np.sum(r)) for r in results]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _kernel_c is None:
        print("compiled kernel not built; run `python setup.py build_ext --inplace` first")
        return
    print(f"{'workload':<24}{'python (ms)':>14}{'cython (ms)':>14}{'speedup':>10}")
    saved = core._kernel
    try:
        for name, jobs in workloads().items():
            core._kernel = _kernel_py
            t_py, r_py = run(jobs, args.repeat)
            core._kernel = _kernel_c
            t_c, r_c = run(jobs, args.repeat)
            if not np.allclose(signature(r_py), signature(r_c), atol=1e-6):
                raise SystemExit(f"backends disagree on {name}")
            print(f"{name:<24}{1e3 * t_py:>14.1f}{1e3 * t_c:>14.1f}{t_py / t_c:>9.1f}x")
    finally:
        core._kernel = saved


if __name__ == "__main__":
    main()
