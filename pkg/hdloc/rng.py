"""Counter-based random streams and deterministic worker pools.

Every replicate draws from its own Philox stream keyed by (seed, *key), so
results never depend on the order or the thread in which replicates run.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

import numpy as np

from .errors import ConfigError

THREADS_ENV = "HDLOC_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def replicate_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the stream identified by ``key`` under ``seed``."""
    sequence = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(sequence))


def resolve_workers(explicit: Optional[int] = None) -> int:
    """Worker count: explicit value, else $HDLOC_THREADS, else the CPU count."""
    if explicit is not None:
        if explicit < 1:
            raise ConfigError(f"thread count must be positive, got {explicit}")
        return int(explicit)
    raw = os.environ.get(THREADS_ENV, "").strip()
    if raw:
        try:
            value = int(raw)
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
        if value < 1:
            raise ConfigError(f"{THREADS_ENV} must be positive, got {value}")
        return value
    return os.cpu_count() or 1


def parallel_map(fn: Callable[[T], R], items: Iterable[T], workers: int = 1) -> List[R]:
    """Map preserving input order; with one worker nothing is threaded."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


__all__ = ["replicate_rng", "resolve_workers", "parallel_map", "THREADS_ENV"]
