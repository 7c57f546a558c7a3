#!/usr/bin/env python3
"""Benchmark the numba kernels against the numpy/scipy fallback paths.

For every lattice size the script times symbolic + numeric Cholesky,
triangular solves on a block of right-hand sides, BFS, and the truncated
kernel smoother, once through the jitted kernels and once through the
fallback the library uses when ``WGMRF_DISABLE_JIT=1``.  Outputs are
checked for agreement before timings are reported.

Usage:
    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --sizes 20 40 80 --repeat 5
    python3 benchmarks/bench_kernels.py --output bench.json
"""
import argparse
import json
import time

import numpy as np
import scipy.sparse as sp

from wgmrf import _kernels as K
from wgmrf._accel import NUMBA_AVAILABLE
from wgmrf.mesh import MeshGraph, build_precision
from wgmrf.sparse_la.ordering import minimum_degree
from wgmrf.weights import _kernel_values


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def factor_inputs(g):
    q = build_precision(g, 1e-4)
    full = q.full()
    perm = minimum_degree(full)
    C = sp.csc_matrix(sp.triu(full[perm][:, perm]))
    C.sort_indices()
    return q.dimension, C.indptr.astype(np.int64), C.indices.astype(np.int64), C.data.astype(np.float64)


def cholesky(n, Ap, Ai, Ax, jit):
    et = K.etree_nb if jit else K.etree_py
    cc = K.colcounts_nb if jit else K.colcounts_py
    num = K.chol_numeric_nb if jit else K.chol_numeric_py
    parent = et(n, Ap, Ai)
    counts = cc(n, Ap, Ai, parent)
    Lp = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=Lp[1:])
    Li = np.empty(Lp[-1], dtype=np.int64)
    Lx = np.empty(Lp[-1], dtype=np.float64)
    num(n, Ap, Ai, Ax, parent, Lp, Li, Lx)
    return Lp, Li, Lx


def run_size(side, repeat, rhs, sigma):
    g = MeshGraph.lattice(side, side)
    n, Ap, Ai, Ax = factor_inputs(g)
    rng = np.random.default_rng(0)
    B = rng.standard_normal((n, rhs))
    f = rng.random(n)
    kv = _kernel_values(sigma)
    rows = []

    def bench(name, jit_fn, ref_fn, close):
        tj, oj = best_of(jit_fn, repeat)
        tr, orf = best_of(ref_fn, max(1, repeat // 2))
        ok = close(oj, orf)
        rows.append({"size": side, "m": n, "kernel": name, "numba_s": tj, "numpy_s": tr,
                     "speedup": tr / tj if tj > 0 else float("inf"), "agree": bool(ok)})

    bench("cholesky", lambda: cholesky(n, Ap, Ai, Ax, True), lambda: cholesky(n, Ap, Ai, Ax, False),
          lambda a, b: np.allclose(a[2], b[2], rtol=1e-12, atol=0))
    Lp, Li, Lx = cholesky(n, Ap, Ai, Ax, True)
    bench("lower_solve", lambda: K.lower_solve(Lp, Li, Lx, B, use_jit=True),
          lambda: K.lower_solve(Lp, Li, Lx, B, use_jit=False), lambda a, b: np.allclose(a, b, rtol=1e-10))
    bench("lower_t_solve", lambda: K.lower_t_solve(Lp, Li, Lx, B, use_jit=True),
          lambda: K.lower_t_solve(Lp, Li, Lx, B, use_jit=False), lambda a, b: np.allclose(a, b, rtol=1e-10))
    bench("bfs", lambda: K.bfs(g.indptr, g.indices, 0, use_jit=True),
          lambda: K.bfs(g.indptr, g.indices, 0, use_jit=False), np.array_equal)
    bench("smooth", lambda: K.smooth(g.indptr, g.indices, f, kv, use_jit=True),
          lambda: K.smooth(g.indptr, g.indices, f, kv, use_jit=False),
          lambda a, b: np.allclose(a[0], b[0], rtol=1e-12) and np.allclose(a[1], b[1], rtol=1e-12))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[20, 40, 60])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--rhs", type=int, default=32, help="right-hand sides per triangular solve")
    ap.add_argument("--sigma", type=float, default=2.0, help="smoother bandwidth")
    ap.add_argument("--output", default=None, help="write results as JSON")
    args = ap.parse_args()
    if not NUMBA_AVAILABLE:
        raise SystemExit("numba is not installed; nothing to compare")

    # compile once so the first timed call is not dominated by JIT
    run_size(4, 1, 2, args.sigma)

    rows = []
    print(f"{'side':>5} {'m':>6} {'kernel':<14} {'numba [s]':>11} {'numpy [s]':>11} {'speedup':>8}  agree")
    for side in args.sizes:
        for r in run_size(side, args.repeat, args.rhs, args.sigma):
            rows.append(r)
            print(f"{r['size']:>5} {r['m']:>6} {r['kernel']:<14} {r['numba_s']:>11.5f} "
                  f"{r['numpy_s']:>11.5f} {r['speedup']:>8.1f}  {r['agree']}")
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)
    if not all(r["agree"] for r in rows):
        raise SystemExit("numba and numpy paths disagree")


if __name__ == "__main__":
    main()
