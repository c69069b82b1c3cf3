"""Shared plumbing: deterministic parallel mapping and canonical JSON."""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence

__all__ = ["ordered_parallel_map", "canonical_json", "config_hash"]


def ordered_parallel_map(fn: Callable, items: Iterable, threads: int = 4) -> list:
    """map(fn, items) with results in input order regardless of scheduling.

    Threads suit the workloads here (numpy releases the interpreter lock in
    the heavy kernels); reduction order is the input order, so floating-point
    results are independent of thread timing.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def canonical_json(payload) -> str:
    """Deterministic JSON: sorted keys, tight separators, no NaN laundering."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(payload) -> str:
    """sha256 of the canonical JSON encoding, hex digest."""
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()
