"""
Single-sign fault injection for mutation testing.

Each fault id names one sign or term in one module; ``inject_fault`` switches
it on for the duration of a ``with`` block.
"""

from __future__ import annotations

import logging
import threading
from contextlib import contextmanager
from typing import Iterator, Set

from ..exceptions import ConfigurationError

logger = logging.getLogger(__name__)

KNOWN_FAULTS = (
    "kernel.koszul",
    "homotopy.h",
    "transfer.a_sign",
    "envelope.swap",
    "foliation.curvature",
)

_active: Set[str] = set()
_lock = threading.Lock()


def active(fault_id: str) -> bool:
    return fault_id in _active


@contextmanager
def inject_fault(fault_id: str) -> Iterator[None]:
    """Activate a known fault until the block exits."""
    if fault_id not in KNOWN_FAULTS:
        raise ConfigurationError(f"unknown fault {fault_id!r}")
    with _lock:
        _active.add(fault_id)
    logger.warning("fault %s injected", fault_id)
    try:
        yield
    finally:
        with _lock:
            _active.discard(fault_id)
