"""
Exact algebra kernel.

This module provides the arithmetic every other module is built on: exact
rationals and sparse polynomials (both from sympy), Koszul signs, unshuffle
enumeration, canonical multi-indices, sparse graded linear combinations and
the free graded commutative algebra of polynomial forms.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import (
    Any,
    Callable,
    Dict,
    Iterable,
    Iterator,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
    Union,
)

from sympy import QQ, Float, sympify
from sympy.core.sympify import SympifyError
from sympy.polys.rings import PolyElement, ring

from ..exceptions import ContractViolation
from . import faults

logger = logging.getLogger(__name__)

Coefficient = Any  # an element of sympy's QQ domain
Scalar = Union[int, Coefficient]

ZERO = QQ.zero
ONE = QQ.one


def to_qq(value: Scalar) -> Coefficient:
    """Convert an int or rational into the QQ domain."""
    return QQ.convert(value)


def parity_sign(exponent: int) -> int:
    """Return (-1)**exponent."""
    return -1 if exponent % 2 else 1


# ---------------------------------------------------------------------------
# Signs and permutations
# ---------------------------------------------------------------------------


def koszul_sign(
    sigma: Sequence[int], degrees: Sequence[int], antisymmetric: bool = True
) -> int:
    """
    Compute the sign chi(sigma, v) of a reordering of graded elements.

    The sign is defined by v_sigma(1) ^ ... ^ v_sigma(n) = chi v_1 ^ ... ^ v_n
    under v ^ w = -(-1)^(vw) w ^ v. With ``antisymmetric=False`` the graded
    symmetric rule v . w = (-1)^(vw) w . v is used instead.

    Args:
        sigma: Permutation of 1..n in one-line notation
        degrees: Degrees of v_1..v_n

    Returns:
        +1 or -1
    """
    n = len(sigma)
    if n != len(degrees):
        raise ContractViolation(
            f"permutation of length {n} with {len(degrees)} degrees"
        )
    if sorted(sigma) != list(range(1, n + 1)):
        raise ContractViolation(f"{tuple(sigma)} is not a permutation of 1..{n}")
    sign = 1
    for i in range(n):
        for j in range(i + 1, n):
            if sigma[i] > sigma[j]:
                swap = parity_sign(degrees[sigma[i] - 1] * degrees[sigma[j] - 1])
                sign *= -swap if antisymmetric else swap
    if faults.active("kernel.koszul") and list(sigma) != sorted(sigma):
        sign = -sign
    return sign


def unshuffles(*blocks: int, ordered: bool = False) -> List[Tuple[int, ...]]:
    """
    Enumerate the (k1, ..., kl)-unshuffles.

    A permutation is returned in one-line notation and is increasing on each
    block of positions. With ``ordered=True`` only the S^< variant is kept:
    whenever two consecutive blocks have equal size, the first entry of the
    earlier block is smaller.
    """
    if not blocks or any(k < 1 for k in blocks):
        raise ContractViolation(f"block sizes must be positive, got {blocks}")
    total = sum(blocks)

    def fill(remaining: Tuple[int, ...], index: int) -> Iterator[List[int]]:
        if index == len(blocks):
            yield []
            return
        for chosen in itertools.combinations(remaining, blocks[index]):
            rest = tuple(v for v in remaining if v not in chosen)
            for tail in fill(rest, index + 1):
                yield list(chosen) + tail

    result = []
    for perm in fill(tuple(range(1, total + 1)), 0):
        if ordered and not _ordered_blocks(perm, blocks):
            continue
        result.append(tuple(perm))
    return result


def _ordered_blocks(perm: Sequence[int], blocks: Sequence[int]) -> bool:
    start = 0
    for i in range(len(blocks) - 1):
        nxt = start + blocks[i]
        if blocks[i] == blocks[i + 1] and perm[start] > perm[nxt]:
            return False
        start = nxt
    return True


def sort_odd(entries: Sequence[int]) -> Tuple[Tuple[int, ...], int]:
    """Sort anticommuting generators; sign 0 marks a repeated generator."""
    items = list(entries)
    if len(set(items)) != len(items):
        return (), 0
    sign = 1
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            if items[i] > items[j]:
                sign = -sign
    return tuple(sorted(items)), sign


@dataclass(frozen=True)
class MultiIndex:
    """Canonical antisymmetric or symmetric multi-index with its sort sign."""

    kind: str  # "antisymmetric" | "symmetric"
    entries: Tuple[int, ...]
    sign: int = 1  # 0 is the canonical zero marker

    @classmethod
    def canonical(cls, kind: str, entries: Sequence[int]) -> "MultiIndex":
        if kind == "antisymmetric":
            ordered, sign = sort_odd(entries)
            return cls(kind, ordered, sign)
        if kind == "symmetric":
            return cls(kind, tuple(sorted(entries)), 1)
        raise ContractViolation(f"unknown multi-index kind {kind!r}")

    @property
    def is_zero(self) -> bool:
        return self.sign == 0


def wedge_and_sym_product(a: MultiIndex, b: MultiIndex) -> Tuple[MultiIndex, int]:
    """Concatenate two multi-indices of the same kind and canonicalize."""
    if a.kind != b.kind:
        raise ContractViolation(f"cannot multiply {a.kind} by {b.kind}")
    merged = MultiIndex.canonical(a.kind, a.entries + b.entries)
    return MultiIndex(merged.kind, merged.entries, 1), merged.sign


# ---------------------------------------------------------------------------
# Polynomials
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolyContext:
    """Ordered leaf variables x1..xn followed by transverse variables u1..um."""

    n: int
    m: int
    extra: Tuple[str, ...] = ()  # further even variables for abstract algebras

    @property
    def names(self) -> Tuple[str, ...]:
        leaf = tuple(f"x{i + 1}" for i in range(self.n))
        transverse = tuple(f"u{a + 1}" for a in range(self.m))
        return leaf + transverse + self.extra

    @property
    def size(self) -> int:
        return len(self.names)

    @cached_property
    def ring(self) -> Any:
        if not self.names:
            raise ContractViolation("a polynomial context needs a variable")
        return ring(",".join(self.names), QQ)[0]

    def gen(self, name: str) -> PolyElement:
        try:
            return self.ring.gens[self.names.index(name)]
        except ValueError as exc:
            raise ContractViolation(f"unknown variable {name!r}") from exc

    def parse(self, text: str) -> PolyElement:
        """Parse a sympy-syntax polynomial literal such as ``"x1*u2**2"``."""
        try:
            symbols = {name: self.gen(name).as_expr() for name in self.names}
            expr = sympify(text, locals=symbols)
            if expr.atoms(Float):
                raise ValueError("floating-point coefficients are not exact")
            return self.ring.from_expr(expr)
        except (SympifyError, ValueError, TypeError, AttributeError) as exc:
            raise ContractViolation(f"cannot parse polynomial {text!r}: {exc}") from exc

    def constant(self, value: Scalar) -> PolyElement:
        return self.ring(to_qq(value))


def poly_ops(a: PolyElement, b: Any, which: str) -> PolyElement:
    """
    Exact ring arithmetic on polynomials of one context.

    ``which`` is "add", "mul" or "partial"; for "partial" the argument ``b`` is
    the generator to differentiate by.
    """
    if getattr(a, "ring", None) is None or getattr(b, "ring", None) is None:
        raise ContractViolation("poly_ops expects polynomial operands")
    if a.ring != b.ring:
        raise ContractViolation("polynomials belong to different contexts")
    if which == "add":
        return a + b
    if which == "mul":
        return a * b
    if which == "partial":
        if b not in a.ring.gens:
            raise ContractViolation("partial derivative needs a generator")
        return a.diff(b)
    raise ContractViolation(f"unknown polynomial operation {which!r}")


# ---------------------------------------------------------------------------
# Graded linear combinations
# ---------------------------------------------------------------------------


class GradedElement:
    """Finite Q-linear combination of hashable basis keys carrying ``.degree``."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Optional[Mapping[Any, Scalar]] = None):
        cleaned: Dict[Any, Coefficient] = {}
        if terms:
            for key, coeff in terms.items():
                value = to_qq(coeff)
                if value:
                    cleaned[key] = value
        self._terms = cleaned
        self._hash: Optional[int] = None

    @classmethod
    def zero(cls) -> "GradedElement":
        return cls()

    @classmethod
    def monomial(cls, key: Any, coeff: Scalar = 1) -> "GradedElement":
        return cls({key: coeff})

    @classmethod
    def from_terms(cls, pairs: Iterable[Tuple[Any, Scalar]]) -> "GradedElement":
        acc: Dict[Any, Coefficient] = {}
        for key, coeff in pairs:
            acc[key] = acc.get(key, ZERO) + to_qq(coeff)
        return cls(acc)

    @classmethod
    def sum(cls, elements: Iterable["GradedElement"]) -> "GradedElement":
        acc: Dict[Any, Coefficient] = {}
        for element in elements:
            for key, coeff in element._terms.items():
                acc[key] = acc.get(key, ZERO) + coeff
        return cls(acc)

    # mapping protocol -----------------------------------------------------

    def items(self) -> Iterable[Tuple[Any, Coefficient]]:
        return self._terms.items()

    def keys(self) -> Iterable[Any]:
        return self._terms.keys()

    def coefficient(self, key: Any) -> Coefficient:
        return self._terms.get(key, ZERO)

    def __iter__(self) -> Iterator[Any]:
        return iter(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __contains__(self, key: Any) -> bool:
        return key in self._terms

    # arithmetic -------------------------------------------------------------

    def __add__(self, other: "GradedElement") -> "GradedElement":
        if not isinstance(other, GradedElement):
            return NotImplemented
        acc = dict(self._terms)
        for key, coeff in other._terms.items():
            acc[key] = acc.get(key, ZERO) + coeff
        return GradedElement(acc)

    def __sub__(self, other: "GradedElement") -> "GradedElement":
        if not isinstance(other, GradedElement):
            return NotImplemented
        return self + (-other)

    def __neg__(self) -> "GradedElement":
        return GradedElement({k: -c for k, c in self._terms.items()})

    def __mul__(self, scalar: Scalar) -> "GradedElement":
        if isinstance(scalar, GradedElement):
            return NotImplemented
        value = to_qq(scalar)
        if not value:
            return GradedElement()
        return GradedElement({k: c * value for k, c in self._terms.items()})

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        if isinstance(other, GradedElement):
            return self._terms == other._terms
        if other == 0:
            return not self._terms
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    # graded structure -------------------------------------------------------

    def degrees(self) -> Tuple[int, ...]:
        return tuple(sorted({key.degree for key in self._terms}))

    @property
    def degree(self) -> Optional[int]:
        """Degree of a homogeneous element; None for zero."""
        found = self.degrees()
        if not found:
            return None
        if len(found) > 1:
            raise ContractViolation(f"element is not homogeneous: degrees {found}")
        return found[0]

    def filter(self, predicate: Callable[[Any], bool]) -> "GradedElement":
        return GradedElement({k: c for k, c in self._terms.items() if predicate(k)})

    def apply(self, action: Callable[[Any], "GradedElement"]) -> "GradedElement":
        """Extend a key-level action linearly."""
        acc: Dict[Any, Coefficient] = {}
        for key, coeff in self._terms.items():
            for out_key, out_coeff in action(key).items():
                acc[out_key] = acc.get(out_key, ZERO) + coeff * out_coeff
        return GradedElement(acc)

    def homogeneous_parts(self) -> List["GradedElement"]:
        return [self.filter(lambda k, d=d: k.degree == d) for d in self.degrees()]

    def sorted_items(self) -> List[Tuple[Any, Coefficient]]:
        return sorted(self._terms.items(), key=lambda kv: repr(kv[0]))

    def __repr__(self) -> str:
        if not self._terms:
            return "GradedElement(0)"
        body = " + ".join(f"{c}*{k!r}" for k, c in self.sorted_items())
        return f"GradedElement({body})"


def bilinear(
    action: Callable[[Any, Any], GradedElement],
    left: GradedElement,
    right: GradedElement,
) -> GradedElement:
    """Extend a key-level bilinear action to elements."""
    acc: Dict[Any, Coefficient] = {}
    for k1, c1 in left.items():
        for k2, c2 in right.items():
            for key, coeff in action(k1, k2).items():
                acc[key] = acc.get(key, ZERO) + c1 * c2 * coeff
    return GradedElement(acc)


def multilinear(
    action: Callable[..., GradedElement], elements: Sequence[GradedElement]
) -> GradedElement:
    """Extend a key-level multilinear action to elements."""
    acc: Dict[Any, Coefficient] = {}
    for combo in itertools.product(*(list(e.items()) for e in elements)):
        scale = ONE
        for _, coeff in combo:
            scale *= coeff
        for key, coeff in action(*(k for k, _ in combo)).items():
            acc[key] = acc.get(key, ZERO) + scale * coeff
    return GradedElement(acc)


# ---------------------------------------------------------------------------
# Polynomial forms: Q[even variables] (x) Lambda[odd generators]
# ---------------------------------------------------------------------------


class FormKey(NamedTuple):
    """Monomial x^exps dx^forms; ``forms`` is strictly increasing."""

    exps: Tuple[int, ...]
    forms: Tuple[int, ...]

    @property
    def degree(self) -> int:
        return len(self.forms)


class FormAlgebra:
    """
    Free graded commutative algebra of polynomial forms.

    The even variables are those of ``context``; the odd generators dx^1..dx^odd
    have degree +1 and pair with the first ``odd`` even variables, so that the
    differential is d = sum_i dx^i d/dx^i.
    """

    def __init__(self, context: PolyContext, odd: int = 0):
        if odd > context.size:
            raise ContractViolation("more odd generators than even variables")
        self.context = context
        self.odd = odd
        self.unit_key = FormKey((0,) * context.size, ())
        self.one = GradedElement.monomial(self.unit_key)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, FormAlgebra)
            and self.context == other.context
            and self.odd == other.odd
        )

    def __hash__(self) -> int:
        return hash((self.context, self.odd))

    # keys -------------------------------------------------------------------

    def variable(self, index: int) -> FormKey:
        exps = [0] * self.context.size
        exps[index] += 1
        return FormKey(tuple(exps), ())

    def dx(self, index: int) -> FormKey:
        return FormKey(self.unit_key.exps, (index,))

    def key_product(self, k1: FormKey, k2: FormKey) -> Tuple[Optional[FormKey], int]:
        forms, sign = sort_odd(k1.forms + k2.forms)
        if not sign:
            return None, 0
        exps = tuple(a + b for a, b in zip(k1.exps, k2.exps))
        return FormKey(exps, forms), sign

    def product(self, k1: FormKey, k2: FormKey) -> GradedElement:
        key, sign = self.key_product(k1, k2)
        if key is None:
            return GradedElement()
        return GradedElement.monomial(key, sign)

    def multiply(self, a: GradedElement, b: GradedElement) -> GradedElement:
        return bilinear(self.product, a, b)

    # derivatives ------------------------------------------------------------

    def partial(self, key: FormKey, var: int) -> GradedElement:
        power = key.exps[var]
        if not power:
            return GradedElement()
        exps = list(key.exps)
        exps[var] -= 1
        return GradedElement.monomial(FormKey(tuple(exps), key.forms), power)

    def odd_derivative(self, key: FormKey, index: int) -> GradedElement:
        """Left derivative d/d(dx^index)."""
        if index not in key.forms:
            return GradedElement()
        position = key.forms.index(index)
        forms = key.forms[:position] + key.forms[position + 1 :]
        return GradedElement.monomial(FormKey(key.exps, forms), parity_sign(position))

    def differential(self, key: FormKey) -> GradedElement:
        terms: List[Tuple[FormKey, Coefficient]] = []
        for i in range(self.odd):
            for out, coeff in self.partial(key, i).items():
                wedge, sign = self.key_product(self.dx(i), out)
                if wedge is not None:
                    terms.append((wedge, coeff * sign))
        return GradedElement.from_terms(terms)

    def d(self, element: GradedElement) -> GradedElement:
        return element.apply(self.differential)

    # conversion and enumeration ---------------------------------------------

    def from_poly(
        self, poly: PolyElement, forms: Tuple[int, ...] = ()
    ) -> GradedElement:
        return GradedElement(
            {FormKey(tuple(monom), forms): coeff for monom, coeff in poly.items()}
        )

    def to_poly(self, element: GradedElement) -> PolyElement:
        if any(key.forms for key in element):
            raise ContractViolation("only degree-0 forms are polynomials")
        return self.context.ring.from_dict({key.exps: c for key, c in element.items()})

    def coefficient_poly(
        self, element: GradedElement, forms: Tuple[int, ...]
    ) -> PolyElement:
        return self.context.ring.from_dict(
            {key.exps: c for key, c in element.items() if key.forms == forms}
        )

    def basis(self, max_degree: int, max_form: Optional[int] = None) -> List[FormKey]:
        top = self.odd if max_form is None else min(max_form, self.odd)
        keys = []
        for total in range(max_degree + 1):
            for exps in _compositions(total, self.context.size):
                for r in range(top + 1):
                    for forms in itertools.combinations(range(self.odd), r):
                        keys.append(FormKey(exps, forms))
        return keys

    def format_key(self, key: FormKey) -> str:
        parts = []
        for name, power in zip(self.context.names, key.exps):
            if power == 1:
                parts.append(name)
            elif power:
                parts.append(f"{name}^{power}")
        if key.forms:
            parts.append("^".join(f"dx{i + 1}" for i in key.forms))
        return "*".join(parts) or "1"


def _compositions(total: int, parts: int) -> Iterator[Tuple[int, ...]]:
    if parts == 0:
        if total == 0:
            yield ()
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def compositions(total: int, parts: int) -> List[Tuple[int, ...]]:
    """All exponent vectors of length ``parts`` summing to ``total``."""
    return list(_compositions(total, parts))
