"""Chunked evaluation over sample points.

Chunks have a fixed size independent of the worker count, and results are
reassembled in chunk order, so reductions are bitwise reproducible for any
number of threads.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import Callable, TypeVar

import numpy as np

CHUNK = 4096

_state = threading.local()
_settings = {"threads": 1}

T = TypeVar("T")


def set_threads(n: int) -> None:
    _settings["threads"] = max(1, int(n))


def get_threads() -> int:
    return _settings["threads"]


@contextmanager
def evaluation_scope():
    """Enable per-thread memoization of node jets for the duration of a block."""
    prev = getattr(_state, "cache", None)
    _state.cache = {}
    try:
        yield
    finally:
        _state.cache = prev


def cache() -> dict | None:
    return getattr(_state, "cache", None)


def map_chunks(fn: Callable[[np.ndarray], T], points: np.ndarray, chunk: int = CHUNK) -> list[T]:
    """Apply ``fn`` to consecutive chunks of ``points`` and return results in order."""
    n = points.shape[0]
    bounds = [(i, min(i + chunk, n)) for i in range(0, n, chunk)] or [(0, 0)]

    def run(b):
        with evaluation_scope():
            return fn(points[b[0]:b[1]])

    threads = get_threads()
    if threads <= 1 or len(bounds) == 1:
        return [run(b) for b in bounds]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(run, bounds))


def map_concat(fn: Callable[[np.ndarray], np.ndarray], points: np.ndarray, chunk: int = CHUNK) -> np.ndarray:
    parts = map_chunks(fn, points, chunk)
    return np.concatenate(parts, axis=0)
