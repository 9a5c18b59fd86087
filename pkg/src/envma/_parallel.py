"""Order-preserving parallel map honoring the ENVMA_THREADS cap.

Results are always reduced in input order, so output is identical for any
worker count.
"""

from __future__ import annotations

import multiprocessing
import os


def worker_count() -> int:
    env = os.environ.get("ENVMA_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"ENVMA_THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def ordered_map(fn, items, workers: int | None = None) -> list:
    items = list(items)
    w = worker_count() if workers is None else max(1, int(workers))
    if w <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    ctx = multiprocessing.get_context("fork")
    chunk = max(1, len(items) // (4 * w))
    with ctx.Pool(processes=w) as pool:
        return pool.map(fn, items, chunksize=chunk)
