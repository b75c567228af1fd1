"""
Core data types for sh-transfer.

This module defines the plain data carriers shared by the engines and the CLI:
enumeration caps, scenarios, check records and reports.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Optional

from .exceptions import ConfigurationError


@dataclass(frozen=True)
class Caps:
    """Enumeration and sampling bounds for every verification."""

    max_arity: int = 5
    max_order: int = 3
    max_degree: int = 4  # Polynomial degree of enumerated coefficients
    max_form_degree: Optional[int] = None  # None means the leaf dimension n
    samples: int = 200  # Seeded tuples per arity when the stratum is large
    guard: int = 64  # Maximum perturbation-series length
    probe_degree: Optional[int] = None  # None means order + 2
    audits: int = 50  # Memo audits per transfer

    def __post_init__(self) -> None:
        for name in ("max_arity", "max_order", "samples", "guard"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be positive")
        if self.max_degree < 0 or self.audits < 0:
            raise ConfigurationError("max_degree and audits must be nonnegative")
        for name in ("max_form_degree", "probe_degree"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ConfigurationError(f"{name} must be nonnegative or null")

    def with_overrides(self, **overrides: Optional[int]) -> "Caps":
        """Return a copy with every non-None override applied."""
        values = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **values)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class Scenario:
    """A JSON-described experiment."""

    name: str
    kind: str  # "foliation" | "toy" | "abstract"
    n: int = 1
    m: int = 0
    V: List[List[str]] = field(default_factory=list)  # V[alpha][i] polynomial text
    caps: Caps = field(default_factory=Caps)
    checks: List[str] = field(default_factory=list)
    seed: int = 0
    faults: List[str] = field(default_factory=list)


@dataclass
class CheckRecord:
    """Outcome of a single exact verification."""

    check_id: str
    reference: str  # Property being verified
    passed: bool
    witness: Optional[str] = None  # First counterexample on failure
    details: Dict[str, Any] = field(default_factory=dict)
    elapsed: float = 0.0  # Seconds; kept out of the report body

    def to_dict(self) -> Dict[str, Any]:
        return {
            "check_id": self.check_id,
            "reference": self.reference,
            "passed": self.passed,
            "witness": self.witness,
            "details": self.details,
        }


@dataclass
class Report:
    """Ordered collection of check records for one scenario run."""

    scenario: str
    seed: int
    caps: Caps
    checks: List[CheckRecord] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(record.passed for record in self.checks)

    def add(self, record: CheckRecord) -> None:
        self.checks.append(record)

    def sorted_checks(self) -> List[CheckRecord]:
        return sorted(self.checks, key=lambda r: r.check_id)
