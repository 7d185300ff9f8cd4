"""Deterministic data-parallel sweeps.

Work is split into pre-indexed chunks; each sample draws from its own
generator seeded by ``(seed, index)``, so results do not depend on the
worker count or on scheduling.
"""

from __future__ import annotations

import logging
from multiprocessing import Pool
from typing import Callable, Sequence, TypeVar

import numpy as np

LOGGER = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def sample_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def uniform_points(seed: int, count: int, dim: int, stream: int = 0) -> np.ndarray:
    """``count`` uniform points of T^dim; point i depends only on (seed, stream, i)."""
    return np.array([np.random.default_rng([seed, stream, i]).random(dim) for i in range(count)]).reshape(count, dim)


def chunked(indices: Sequence[int], parts: int) -> list[list[int]]:
    parts = max(1, min(parts, len(indices)))
    return [list(chunk) for chunk in np.array_split(np.asarray(indices, dtype=int), parts) if len(chunk)]


def parallel_map(func: Callable[[T], R], items: Sequence[T], workers: int = 1) -> list[R]:
    """Order-preserving map; uses a process pool when ``workers > 1``."""
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    LOGGER.debug("dispatching %d chunks to %d workers", len(items), workers)
    with Pool(processes=workers) as pool:
        return pool.map(func, items)
