"""Compare the compiled kernels with the NumPy fallback.

Usage::

    python benchmarks/bench_kernels.py [--rows 5000] [--repeat 20]

Prints the median time per call for each backend and the speedup.
"""
import argparse
import statistics
import time

import numpy as np

from resbn.kernels import _pykernels

try:
    from resbn.kernels import _ckernels
except ImportError:
    _ckernels = None


def timeit(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def cases(rows, rng):
    arities = np.array([3, 4, 5, 2, 6], dtype=np.int32)
    codes = np.column_stack([rng.integers(0, a, rows) for a in arities]).astype(np.int32)
    codes[rng.random(codes.shape) < 0.05] = -1
    codes = np.ascontiguousarray(codes)
    parents = np.array([1, 2, 3], dtype=np.int64)
    cat = rng.integers(-1, 5, (rows, 4)).astype(np.int32)
    num = rng.normal(size=(rows, 7))
    num[rng.random(num.shape) < 0.05] = np.nan
    tcat = cat[0].copy()
    tnum = np.nan_to_num(num[0])
    wcat, wnum = np.ones(4), np.ones(7)
    scale = np.ones(7)
    return {
        "k2 family score": lambda m: m.discrete_family_score(codes, 0, parents, arities, _pykernels.K2),
        "bic family score": lambda m: m.discrete_family_score(codes, 0, parents, arities, _pykernels.BIC),
        "mixed dissimilarity": lambda m: m.mixed_dissimilarity(cat, num, tcat, tnum, wcat, wnum, scale),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=5000)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<22}{'numpy ms':>10}{'cython ms':>11}{'speedup':>9}")
    for name, call in cases(args.rows, rng).items():
        py = timeit(lambda: call(_pykernels), args.repeat) * 1e3
        if _ckernels is None:
            print(f"{name:<22}{py:>10.3f}{'n/a':>11}{'':>9}")
            continue
        c = timeit(lambda: call(_ckernels), args.repeat) * 1e3
        print(f"{name:<22}{py:>10.3f}{c:>11.3f}{py / c:>8.1f}x")


if __name__ == "__main__":
    main()
