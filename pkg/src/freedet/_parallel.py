"""Deterministic fan-out helper: results always come back in input order."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

from freedet import kernels

T = TypeVar("T")
R = TypeVar("R")


def default_threads() -> int:
    return os.cpu_count() or 1


def ordered_map(fn: Callable[[T], R], items: Sequence[T], threads: int) -> list[R]:
    """Map preserving input order; thread count never changes the result.

    Fan-out only happens on the compiled backend, whose kernels release
    the GIL; with the pure-Python kernels extra threads just contend for
    the interpreter lock (measured as a net slowdown), so the reductions
    run on the calling thread instead.  Work is handed out in contiguous
    chunks so tasks do not thrash between workers.
    """
    if kernels.BACKEND != "native":
        threads = 1
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    chunksize = max(1, -(-len(items) // threads))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items, chunksize=chunksize))
