"""
Cochain complexes, contraction data and the perturbation lemma.

Maps are evaluators on basis keys extended linearly, so every computation
touches finitely many monomials of a locally finite, infinite-dimensional
space. A contraction (p, j, h) of a big complex onto a small one satisfies

    p j = id,   h d + d h = id - j p,   h h = h j = p h = 0.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Hashable, List, Optional, Sequence, Tuple

from ..exceptions import ContractViolation, NonTerminationError
from ..types import Caps, CheckRecord, Report
from ..utils.helpers import MemoTable
from . import faults
from .kernel import GradedElement

logger = logging.getLogger(__name__)

KeyAction = Callable[[Hashable], GradedElement]

DEFAULT_GUARD = 64


class GradedMap:
    """A linear map of fixed degree given by its action on basis keys."""

    def __init__(self, degree: int, action: KeyAction, name: str = "map"):
        self.degree = degree
        self.name = name
        self._action = action
        self._memo = MemoTable(name=name)

    @classmethod
    def identity(cls, name: str = "id") -> "GradedMap":
        return cls(0, GradedElement.monomial, name)

    @classmethod
    def zero(cls, degree: int = 0, name: str = "0") -> "GradedMap":
        return cls(degree, lambda key: GradedElement(), name)

    def on_key(self, key: Hashable) -> GradedElement:
        return self._memo.fetch(key, lambda: self._action(key))

    def __call__(self, element: GradedElement) -> GradedElement:
        return element.apply(self.on_key)

    def __matmul__(self, other: "GradedMap") -> "GradedMap":
        """Composition: ``(f @ g)(x) = f(g(x))``."""
        return GradedMap(
            self.degree + other.degree,
            lambda key: self(other.on_key(key)),
            f"{self.name}.{other.name}",
        )

    def __add__(self, other: "GradedMap") -> "GradedMap":
        self._check_degree(other)
        return GradedMap(
            self.degree,
            lambda key: self.on_key(key) + other.on_key(key),
            f"({self.name}+{other.name})",
        )

    def __sub__(self, other: "GradedMap") -> "GradedMap":
        self._check_degree(other)
        return GradedMap(
            self.degree,
            lambda key: self.on_key(key) - other.on_key(key),
            f"({self.name}-{other.name})",
        )

    def __neg__(self) -> "GradedMap":
        return GradedMap(self.degree, lambda key: -self.on_key(key), f"-{self.name}")

    def scale(self, factor: Any) -> "GradedMap":
        return GradedMap(
            self.degree, lambda key: self.on_key(key) * factor, f"{factor}{self.name}"
        )

    def _check_degree(self, other: "GradedMap") -> None:
        if self.degree != other.degree:
            raise ContractViolation(
                f"cannot add maps of degrees {self.degree} and {other.degree}"
            )

    def __repr__(self) -> str:
        return f"GradedMap({self.name}, degree={self.degree})"


@dataclass(frozen=True)
class Complex:
    """A cochain complex given by a capped basis enumerator and a differential."""

    name: str
    basis: Callable[[Caps], Sequence[Hashable]]
    differential: GradedMap
    filtration: Optional[Callable[[Hashable], int]] = None

    def square_zero_witness(self, caps: Caps) -> Optional[Hashable]:
        """Return the first basis key with d(d(key)) != 0, if any."""
        d = self.differential
        for key in self.basis(caps):
            if d(d.on_key(key)):
                return key
        return None

    def with_differential(self, differential: GradedMap, name: str) -> "Complex":
        return Complex(name, self.basis, differential, self.filtration)


@dataclass(frozen=True)
class ContractionData:
    """Contraction of ``big`` onto ``small`` by (p, j, h)."""

    big: Complex
    small: Complex
    p: GradedMap
    j: GradedMap
    h: GradedMap


def _first_failure(
    keys: Sequence[Hashable], residual: KeyAction, jobs: int
) -> Tuple[Optional[Hashable], GradedElement]:
    if jobs > 1 and len(keys) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            values = list(executor.map(residual, keys))
    else:
        values = [residual(key) for key in keys]
    for key, value in zip(keys, values):
        if value:
            return key, value
    return None, GradedElement()


def verify_contraction(
    c: ContractionData, caps: Caps, jobs: int = 1, label: str = "contraction"
) -> Report:
    """
    Check the contraction axioms on every basis key within caps.

    Args:
        c: Contraction to verify
        caps: Enumeration bounds
        jobs: Worker threads for the per-key checks
        label: Prefix for check ids

    Returns:
        Report with one record per axiom, carrying the first counterexample
    """
    big_keys = list(c.big.basis(caps))
    small_keys = list(c.small.basis(caps))
    d, d_small = c.big.differential, c.small.differential
    p, j, h = c.p, c.j, c.h

    axioms: List[Tuple[str, str, Sequence[Hashable], KeyAction]] = [
        ("pj", "p j = id", small_keys, lambda k: p(j.on_key(k)) - GradedElement.monomial(k)),
        (
            "homotopy",
            "h d + d h = id - j p",
            big_keys,
            lambda k: h(d.on_key(k))
            + d(h.on_key(k))
            - GradedElement.monomial(k)
            + j(p.on_key(k)),
        ),
        ("hh", "h h = 0", big_keys, lambda k: h(h.on_key(k))),
        ("hj", "h j = 0", small_keys, lambda k: h(j.on_key(k))),
        ("ph", "p h = 0", big_keys, lambda k: p(h.on_key(k))),
        ("p_chain", "p d = d p", big_keys, lambda k: p(d.on_key(k)) - d_small(p.on_key(k))),
        ("j_chain", "j d = d j", small_keys, lambda k: j(d_small.on_key(k)) - d(j.on_key(k))),
    ]

    report = Report(scenario=label, seed=0, caps=caps)
    for axiom, reference, keys, residual in axioms:
        started = time.perf_counter()
        key, value = _first_failure(keys, residual, jobs)
        record = CheckRecord(
            check_id=f"{label}.{axiom}",
            reference=reference,
            passed=key is None,
            witness=None if key is None else f"{key!r} -> {value!r}",
            details={"basis_size": len(keys)},
            elapsed=time.perf_counter() - started,
        )
        if not record.passed:
            logger.warning("%s failed at %r", record.check_id, key)
        report.add(record)
    return report


def perturbation_series(
    t: GradedMap,
    h0: GradedMap,
    element: GradedElement,
    guard: int = DEFAULT_GUARD,
    form: str = "left",
) -> GradedElement:
    """
    Evaluate X = sum_i t (h0 t)^i on one element.

    ``form="left"`` sums (h0 t)^i x first and applies t once; ``form="right"``
    iterates z -> t h0 z starting from t x, i.e. sum_i (t h0)^i t.
    """
    if form not in ("left", "right"):
        raise ContractViolation(f"unknown series form {form!r}")
    terms = []
    current = element if form == "left" else t(element)
    steps = 0
    while current:
        if steps >= guard:
            raise NonTerminationError(
                f"perturbation series did not terminate within {guard} terms",
                element=element,
            )
        terms.append(current)
        current = h0(t(current)) if form == "left" else t(h0(current))
        steps += 1
    logger.debug("series of %r stopped after %d terms", element, steps)
    total = GradedElement.sum(terms)
    return t(total) if form == "left" else total


def perturb(
    c: ContractionData,
    delta_new: GradedMap,
    guard: int = DEFAULT_GUARD,
    caps: Optional[Caps] = None,
) -> Tuple[ContractionData, GradedMap]:
    """
    Perturbation lemma.

    With t = d0 - d and X = sum_i t (h0 t)^i, returns the contraction
    (p0 + p0 X h0, j0 + h0 X j0, h0 + h0 X h0) of (big, d) onto
    (small, d_small - p0 X j0) together with the new small differential.
    """
    if delta_new.degree != 1:
        raise ContractViolation("the perturbed differential must have degree +1")
    big = c.big.with_differential(delta_new, f"{c.big.name}_t")
    if caps is not None:
        witness = big.square_zero_witness(caps)
        if witness is not None:
            raise ContractViolation(
                f"perturbed differential is not square-zero at {witness!r}"
            )

    t = c.big.differential - delta_new
    X = GradedMap(
        1,
        lambda key: perturbation_series(t, c.h, GradedElement.monomial(key), guard),
        "X",
    )
    p_t = c.p + c.p @ X @ c.h
    j_t = c.j + c.h @ X @ c.j
    if faults.active("homotopy.h"):
        h_t = c.h - c.h @ X @ c.h
    else:
        h_t = c.h + c.h @ X @ c.h
    d_small = c.small.differential - c.p @ X @ c.j
    small = c.small.with_differential(d_small, f"{c.small.name}_t")
    logger.info("perturbed %s with guard %d", c.big.name, guard)
    return ContractionData(big, small, p_t, j_t, h_t), d_small


def check_filtration_descent(c: Complex, t: GradedMap, caps: Caps) -> bool:
    """True iff ``t`` strictly lowers the filtration level on every basis key."""
    level = c.filtration
    if level is None:
        raise ContractViolation(f"complex {c.name} carries no filtration")
    for key in c.basis(caps):
        start = level(key)
        if any(level(out) >= start for out in t.on_key(key)):
            logger.debug("filtration descent fails at %r", key)
            return False
    return True
