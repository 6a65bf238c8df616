"""Replica-block fan-out.

Work is cut into blocks whose boundaries depend only on the problem size,
never on the thread count, and results come back in block order; this is
what makes every estimator byte-identical across ``threads`` settings.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")

BLOCK = 4096
ENV_THREADS = "CANYON_THREADS"


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        threads = int(os.environ.get(ENV_THREADS, "1") or 1)
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    return threads


def blocks(n: int, size: int = BLOCK) -> list[tuple[int, int]]:
    """``(first, count)`` pairs covering ``range(n)``."""
    return [(i, min(size, n - i)) for i in range(0, n, size)]


def map_ordered(fn: Callable[..., T], items: Sequence, threads: int | None = None) -> list[T]:
    threads = resolve_threads(threads)
    if threads == 1 or len(items) <= 1:
        return [fn(*it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda it: fn(*it), items))
