"""Time the compiled and pure-Python reduction kernels on the same boundary matrices.

    python benchmarks/bench_reduce.py [--repeat 3] [--sizes 200 800 2000]

Each size is a noisy circle; alpha complexes for planar clouds and Rips
2-skeletons (capped at half the diameter) for small 3D clouds.
"""
import argparse
import time

import numpy as np

from tunpd import _kernel
from tunpd.complex import alpha_filtration_2d, rips_filtration
from tunpd.persistence import boundary_matrix


def noisy_circle(n, dim, rng):
    t = rng.uniform(0, 2 * np.pi, n)
    pts = np.column_stack([np.cos(t), np.sin(t)] + [np.zeros(n)] * (dim - 2))
    return pts + rng.normal(scale=0.05, size=pts.shape)


def best_time(fn, bm, clearing, repeat):
    args = (bm.indptr, bm.indices, bm.dims, clearing)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        low, n_add = fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times), low, n_add


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--sizes", type=int, nargs="+", default=[200, 800, 2000])
    ap.add_argument("--rips-sizes", type=int, nargs="+", default=[40, 80])
    args = ap.parse_args(argv)
    if _kernel.BACKEND != "cython":
        print("compiled kernel not available; only the Python timings are meaningful")
    rng = np.random.default_rng(0)
    cases = [("alpha", n, alpha_filtration_2d(noisy_circle(n, 2, rng))) for n in args.sizes]
    cases += [("rips", n, rips_filtration(noisy_circle(n, 3, rng))) for n in args.rips_sizes]

    print(f"{'complex':<7} {'n':>5} {'simplices':>9} {'clear':>5} {'python s':>10} "
          f"{'cython s':>10} {'speedup':>8} {'additions':>9}")
    for name, n, fc in cases:
        bm = boundary_matrix(fc)
        for clearing in (False, True):
            tp, low_p, add_p = best_time(_kernel.python_reduce_columns, bm, clearing, args.repeat)
            tc, low_c, add_c = best_time(_kernel.reduce_columns, bm, clearing, args.repeat)
            assert np.array_equal(low_p, low_c) and add_p == add_c, "backends disagree"
            print(f"{name:<7} {n:>5} {len(bm):>9} {str(clearing):>5} {tp:>10.4f} "
                  f"{tc:>10.4f} {tp / tc:>7.1f}x {add_c:>9}")


if __name__ == "__main__":
    main()
