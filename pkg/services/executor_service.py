"""Worker pool for disorder sampling and Δ-sweeps.

Results come back in input order, so anything reduced from them is independent
of the number of threads.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

from config import settings

logger = logging.getLogger("replica_lab.executor")

T = TypeVar("T")
R = TypeVar("R")


def map_ordered(fn: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
    """Apply ``fn`` to every item, preserving order.

    Args:
        fn: Pure function of one item.
        items: Work items.
        threads: Worker count; ``None`` uses ``settings.THREADS``; ≤ 1 runs serially.

    Returns:
        ``[fn(item) for item in items]``.
    """
    items = list(items)
    threads = settings.THREADS if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    logger.debug(f"Dispatching {len(items)} items on {threads} threads")
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def chunk_ranges(total: int, chunks: int) -> list[range]:
    """Split ``range(total)`` into at most ``chunks`` contiguous ranges."""
    chunks = max(1, min(chunks, total))
    bounds = [total * i // chunks for i in range(chunks + 1)]
    return [range(bounds[i], bounds[i + 1]) for i in range(chunks) if bounds[i] < bounds[i + 1]]
