"""
Utility modules for sh-transfer.

This package contains the memo table and seeded sampling helpers, scenario
validation, JSON export and the acceptance checks. Only the helpers are
re-exported here; the core modules import them while ``core`` initializes.
"""

from .helpers import (
    MemoTable,
    first_nonzero,
    format_rational,
    seeded_choice,
    seeded_product,
    seeded_tuples,
)

__all__ = [
    "MemoTable",
    "seeded_tuples",
    "seeded_choice",
    "seeded_product",
    "format_rational",
    "first_nonzero",
]
