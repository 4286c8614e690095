"""Benchmark the compiled kernels against the pure-numpy fallbacks.

Run:  python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from freedet import kernels

try:
    from freedet import _native
except ImportError:
    _native = None


def boxes(rng, n):
    out = np.empty((n, 4))
    out[:, :2] = rng.uniform(0, 900, size=(n, 2))
    out[:, 2:] = rng.uniform(10, 80, size=(n, 2))
    return np.ascontiguousarray(out)


def timeit(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def row(name, native_fn, numpy_fn):
    slow = timeit(numpy_fn)
    if native_fn is None:
        print(f"{name:<38} {'-':>10} {slow * 1e3:>9.2f}ms {'-':>8}")
        return
    fast = timeit(native_fn)
    print(f"{name:<38} {fast * 1e3:>8.2f}ms {slow * 1e3:>9.2f}ms {slow / fast:>7.1f}x")


def main():
    rng = np.random.default_rng(0)
    print(f"active backend: {kernels.active_backend()}")
    print(f"{'kernel':<38} {'native':>10} {'numpy':>11} {'speedup':>8}")

    a, b = boxes(rng, 2000), boxes(rng, 1500)
    row(
        "pairwise_iou 2000x1500",
        None if _native is None else (lambda: _native.pairwise_iou(a, b)),
        lambda: kernels.pairwise_iou_numpy(a, b),
    )

    iou = np.ascontiguousarray(rng.uniform(0, 1, size=(3000, 200)))
    allowed = np.ones(iou.shape, dtype=np.uint8)
    row(
        "greedy_match 3000x200",
        None if _native is None else (lambda: _native.greedy_match(iou, 0.5, allowed)),
        lambda: kernels.greedy_match_numpy(iou, 0.5, allowed),
    )

    n_groups = 20_000
    rows_c = rng.integers(1, 12, size=n_groups).astype(np.int64)
    cols_c = rng.integers(1, 12, size=n_groups).astype(np.int64)
    flat = np.ascontiguousarray(rng.uniform(0, 1, size=int((rows_c * cols_c).sum())))
    row(
        f"greedy_match_groups {n_groups} groups",
        None
        if _native is None
        else (lambda: _native.greedy_match_groups(flat, None, rows_c, cols_c, 0.5)),
        lambda: kernels.greedy_match_groups_numpy(flat, None, rows_c, cols_c, 0.5),
    )

    crowded = boxes(rng, 5000)
    row(
        "nms_keep 5000 boxes",
        None if _native is None else (lambda: _native.nms_keep(crowded, 0.5)),
        lambda: kernels.nms_keep_numpy(crowded, 0.5),
    )

    supp, refs = boxes(rng, 5000), boxes(rng, 2000)
    row(
        "cross_suppress 5000 vs 2000",
        None if _native is None else (lambda: _native.cross_suppress(supp, refs, 0.5)),
        lambda: kernels.cross_suppress_numpy(supp, refs, 0.5),
    )


if __name__ == "__main__":
    main()
