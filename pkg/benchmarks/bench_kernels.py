"""Compare the numba kernels with the pure-numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py [--size N] [--repeat R]``.
Each kernel is called once to trigger compilation, then timed ``R`` times;
the best time is reported together with the largest relative difference
between the two backends' outputs.
"""
import argparse
import time

import numpy as np

from drsurf import _kernels
from drsurf.critical_maps import _origin_tree, square_patch, square_torus, refine
from drsurf.discrete_calculus import laplacian_matrix


def best_time(fn, repeat):
    fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=40, help="half width of the planar patch")
    ap.add_argument("--levels", type=int, default=4, help="refinements of the torus for the CG solve")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels.numba_kernels is None:
        raise SystemExit("numba is not importable; nothing to compare")

    m = square_patch(args.size, theta=0.6)
    tree = _origin_tree(m)
    factor = np.ascontiguousarray((2 + 0.3 * tree.dz) / (2 - 0.3 * tree.dz))
    prev = np.ascontiguousarray(m.vertex_z)
    f = np.ascontiguousarray(np.exp(0.2 * m.vertex_z))
    quads, rho = m.dc.quads, m.dc.rho

    t = square_torus(2, 2, 0.7)
    for _ in range(args.levels):
        t = refine(t)
    lap = laplacian_matrix(t.dc).tocsr()
    b = np.random.default_rng(0).normal(size=lap.shape[0])
    comp = np.zeros(lap.shape[0], dtype=np.int64)
    cg_args = (lap.indptr.astype(np.int64), lap.indices.astype(np.int64), lap.data, b, comp, 1, 1e-11,
               10 * lap.shape[0])

    cases = {
        "propagate_product": lambda k: k.propagate_product(tree.order, tree.parent, factor, 1.0 + 0j),
        "propagate_power": lambda k: k.propagate_power(tree.order, tree.parent, tree.dz, prev, 3.0),
        "cr_residuals": lambda k: k.cr_residuals(quads, rho, f),
        "cg_solve": lambda k: k.cg_solve(*cg_args)[0],
    }
    print(f"patch vertices: {m.dc.n_vertices}, torus vertices: {lap.shape[0]}")
    print(f"{'kernel':<20}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}{'rel diff':>12}")
    for name, call in cases.items():
        tn, on = best_time(lambda: call(_kernels.numpy_kernels), args.repeat)
        tb, ob = best_time(lambda: call(_kernels.numba_kernels), args.repeat)
        on, ob = np.asarray(on), np.asarray(ob)
        diff = float(np.max(np.abs(on - ob)) / max(1.0, float(np.max(np.abs(on)))))
        print(f"{name:<20}{tn:>12.5f}{tb:>12.5f}{tn / tb:>10.2f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
