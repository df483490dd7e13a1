"""Small shared helpers."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def default_thread_count() -> int:
    """Worker count taken from QILP_THREADS, defaulting to 1."""
    raw = os.environ.get("QILP_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def parallel_map(fn, items, threads: int = 1) -> list:
    """Order-preserving map, optionally on a thread pool.

    Results are merged by input index, so the output is identical for any
    thread count.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
