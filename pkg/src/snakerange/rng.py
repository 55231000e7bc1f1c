"""Deterministic random-stream splitting.

Every stochastic routine takes a ``numpy.random.Generator``.  Streams for
independent replicas are derived from ``(master_seed, replica_index)`` so that
ensembles can be generated in any order or on any worker and still merge to
identical results.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")


def stream(seed: int, replica: int = 0, *extra: int) -> np.random.Generator:
    """Generator for replica ``replica`` of master seed ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(replica), *map(int, extra)]))


def chunk_sizes(total: int, chunk: int) -> list[int]:
    """Split ``total`` items into consecutive chunks of at most ``chunk``."""
    if total < 0 or chunk < 1:
        raise ValueError("total must be >= 0 and chunk >= 1")
    sizes = [chunk] * (total // chunk)
    if total % chunk:
        sizes.append(total % chunk)
    return sizes


def parallel_map(fn: Callable[[T], R], items: Sequence[T] | Iterable[T], workers: int = 1) -> list[R]:
    """Map ``fn`` over ``items`` preserving order.

    With ``workers > 1`` a process pool is used; results are returned in input
    order so any later reduction is deterministic.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
