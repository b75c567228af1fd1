"""
Helper functions for sh-transfer.

This module contains the shared memo table used by the evaluators and the
seeded sampling used by every residual check.
"""

from __future__ import annotations

import itertools
import random
import threading
from typing import (
    Any,
    Callable,
    Dict,
    Hashable,
    Iterable,
    List,
    Optional,
    Sequence,
    Tuple,
)

from sympy import QQ


class MemoTable:
    """
    Thread-safe memo table with oldest-entry eviction.

    Reads and writes take one lock; a value computed twice by racing workers
    is identical, so the second write is harmless.
    """

    def __init__(self, capacity: int = 200_000, name: str = "memo"):
        self.capacity = capacity
        self.name = name
        self._store: Dict[Hashable, Any] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        self.enabled = True

    def get(self, key: Hashable) -> Tuple[bool, Any]:
        with self._lock:
            if key in self._store:
                self.hits += 1
                return True, self._store[key]
            self.misses += 1
            return False, None

    def put(self, key: Hashable, value: Any) -> None:
        with self._lock:
            if len(self._store) >= self.capacity:
                oldest_key = next(iter(self._store))
                del self._store[oldest_key]
            self._store[key] = value

    def fetch(self, key: Hashable, compute: Callable[[], Any]) -> Any:
        """Return the cached value for ``key``, computing it on a miss."""
        if not self.enabled:
            return compute()
        found, value = self.get(key)
        if found:
            return value
        value = compute()
        self.put(key, value)
        return value

    def keys(self) -> List[Hashable]:
        with self._lock:
            return list(self._store)

    def clear(self) -> None:
        with self._lock:
            self._store.clear()

    def __len__(self) -> int:
        return len(self._store)


def seeded_tuples(
    pool: Sequence[Any], arity: int, limit: int, seed: int
) -> List[Tuple[Any, ...]]:
    """
    All ``arity``-tuples from ``pool`` when there are at most ``limit`` of
    them, otherwise ``limit`` tuples drawn with a seeded generator.
    """
    if not pool:
        return []
    total = len(pool) ** arity
    if total <= limit:
        return list(itertools.product(pool, repeat=arity))
    rng = random.Random(seed * 1_000_003 + arity)
    return [tuple(rng.choice(pool) for _ in range(arity)) for _ in range(limit)]


def seeded_choice(pool: Sequence[Any], limit: int, seed: int) -> List[Any]:
    """Up to ``limit`` items of ``pool``, deterministic in ``seed``."""
    if len(pool) <= limit:
        return list(pool)
    rng = random.Random(seed)
    return rng.sample(list(pool), limit)


def format_rational(value: Any) -> str:
    """Render a rational as "p" or "p/q"."""
    value = QQ.convert(value)
    num, den = QQ.numer(value), QQ.denom(value)
    return str(num) if den == 1 else f"{num}/{den}"


def first_nonzero(
    items: Iterable[Any], evaluate: Callable[[Any], Any]
) -> Optional[Tuple[Any, Any]]:
    """Return (item, value) for the first item whose value is nonzero."""
    for item in items:
        value = evaluate(item)
        if value:
            return item, value
    return None


def seeded_product(
    pools: Sequence[Sequence[Any]], limit: int, seed: int
) -> List[Tuple[Any, ...]]:
    """Like ``seeded_tuples`` with one pool per slot."""
    if any(not pool for pool in pools):
        return []
    total = 1
    for pool in pools:
        total *= len(pool)
    if total <= limit:
        return list(itertools.product(*pools))
    rng = random.Random(seed * 1_000_003 + len(pools))
    return [tuple(rng.choice(pool) for pool in pools) for _ in range(limit)]
