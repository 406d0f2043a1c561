"""Time the compiled and pure-Python max-flow kernels on residual-like grids.

Usage: python3 benchmarks/bench_maxflow.py [--sizes 30x100,60x200] [--reps 5]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from corola import _maxflow_py, segmentation

try:
    from corola import _maxflow
except ImportError:
    _maxflow = None


def make_problem(h, w, seed=0):
    rng = np.random.default_rng(seed)
    e = 0.02 * rng.standard_normal((h, w))
    e[h // 3:h // 3 + h // 3, w // 4:w // 4 + w // 10] += 0.3  # a block of outliers
    return segmentation.MrfProblem.from_residual(e, 2.5e-4, 5e-4, h, w)


def arrays(p):
    first, head, tail, sister = segmentation._csr_topology(p.height, p.width, p.connectivity)
    rcap = np.full(len(head), int(segmentation.quantize(p.gamma)), dtype=np.int64)
    tr = segmentation.quantize(p.unary_fg) - segmentation.quantize(p.unary_bg)
    return first, head, tail, sister, rcap, tr


def best_time(fn, args, reps):
    times, out = [], None
    for _ in range(reps):
        fresh = [a.copy() for a in args]  # kernels may modify capacities in place
        t0 = time.perf_counter()
        out = fn(*fresh)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="30x100,60x200,120x400")
    ap.add_argument("--reps", type=int, default=5)
    args = ap.parse_args(argv)
    print(f"{'grid':>10} {'cython ms':>10} {'python ms':>10} {'speedup':>8} agree")
    for item in args.sizes.split(","):
        h, w = (int(v) for v in item.lower().split("x"))
        arr = arrays(make_problem(h, w))
        t_py, (f_py, lab_py) = best_time(_maxflow_py.bk_maxflow, arr, max(1, args.reps // 2))
        if _maxflow is None:
            print(f"{item:>10} {'n/a':>10} {1e3 * t_py:10.2f} {'':>8} -")
            continue
        t_cy, (f_cy, lab_cy) = best_time(_maxflow.bk_maxflow, arr, args.reps)
        agree = f_cy == f_py and np.array_equal(np.asarray(lab_cy), np.asarray(lab_py))
        print(f"{item:>10} {1e3 * t_cy:10.2f} {1e3 * t_py:10.2f} {t_py / t_cy:8.1f} {agree}")


if __name__ == "__main__":
    main()
