from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence, TypeVar

import numpy as np

from .errors import ConfigError
from .limits import WORKERS_ENV

logger = logging.getLogger(__name__)

T = TypeVar("T")


@dataclass(frozen=True)
class WorkerConfig:
    workers: int = 1

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ConfigError("workers must be >= 1", context={"workers": self.workers})


def resolve_workers(value: int | None = None) -> WorkerConfig:
    """
    Worker count from an explicit value, else from the environment, else 1.
    """
    if value is not None:
        return WorkerConfig(workers=int(value))
    raw = os.environ.get(WORKERS_ENV, "").strip()
    if not raw:
        return WorkerConfig()
    try:
        return WorkerConfig(workers=int(raw))
    except ValueError as e:
        raise ConfigError(f"{WORKERS_ENV} is not an integer", context={"value": raw}) from e


def derive_rng(seed: int, index: int) -> np.random.Generator:
    """Random stream number `index` derived from a master seed."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


def map_indexed(
    fn: Callable[[int], T],
    n_tasks: int,
    config: WorkerConfig | None = None,
) -> list[T]:
    """
    Evaluate fn(0), ..., fn(n_tasks - 1) and return the results in index order.

    Every task draws its randomness from its own index, so the output does not
    depend on the worker count.
    """
    cfg = config or WorkerConfig()
    if n_tasks <= 0:
        return []
    if cfg.workers == 1 or n_tasks == 1:
        return [fn(i) for i in range(n_tasks)]

    logger.debug("dispatching %d tasks on %d workers", n_tasks, cfg.workers)
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(fn, range(n_tasks)))


def chunk_bounds(n: int, chunk: int) -> Sequence[tuple[int, int]]:
    return [(a, min(a + chunk, n)) for a in range(0, n, chunk)]


def derive_seed(seed: int, index: int) -> int:
    """Integer seed of stream `index`, for APIs that take a plain seed."""
    return int(np.random.SeedSequence(int(seed), spawn_key=(int(index),)).generate_state(1)[0])
