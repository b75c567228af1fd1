"""
Custom exceptions for sh-transfer.

This module defines the exception classes raised by the algebra kernel, the
perturbation and transfer engines, the foliation model and the CLI. Failed
identity checks are reported as data and never raised.
"""

from __future__ import annotations

from typing import Any, Optional


class ShTransferError(Exception):
    """Base exception for sh-transfer errors."""


class ContractViolation(ShTransferError):
    """Raised when an operation is called outside its precondition."""


class CapacityError(ShTransferError):
    """Raised when an arity or order exceeds the configured caps."""


class NonTerminationError(ShTransferError):
    """Raised when a series or a rewriting exceeds its guard."""

    def __init__(self, message: str, element: Any = None):
        super().__init__(message)
        self.element = element


class VerificationError(ShTransferError):
    """Raised when a verification the caller depends on has failed."""

    def __init__(self, message: str, record: Optional[Any] = None):
        super().__init__(message)
        self.record = record


class ScenarioError(ShTransferError):
    """Raised when a scenario file is malformed."""


class ConfigurationError(ShTransferError):
    """Raised when configuration values are invalid."""
