"""Seeded random streams and an order-preserving worker pool."""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

import numpy as np

from zbstein.core.config import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Build a generator for the stream (seed, *stream); identical keys give identical draws."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, stream)]))


def worker_count(requested: Optional[int] = None) -> int:
    """Worker count capped by ZB_THREADS."""
    if requested is None:
        return settings.threads
    return max(1, min(requested, settings.threads))


def run_ordered(
    func: Callable[[int, T], R],
    items: Sequence[T],
    max_workers: Optional[int] = None,
) -> List[R]:
    """Apply func(index, item) to every item; results come back in index order."""
    workers = worker_count(max_workers)
    if workers == 1 or len(items) <= 1:
        return [func(i, item) for i, item in enumerate(items)]

    logger.debug(f"Dispatching {len(items)} tasks to {workers} workers")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(func, i, item) for i, item in enumerate(items)]
        return [future.result() for future in futures]
