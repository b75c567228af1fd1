"""
Differential operators, symbols and enveloping algebras.

Operators over polynomial forms live in the Weyl-Clifford algebra of
``operators``; this module adds the order calculus on raw evaluators,
principal symbols with their Poisson bracket, and the enveloping algebra of
a Lie-Rinehart algebra presented by generators, a bracket table and an
anchor table. Envelope elements are kept in normal order and products are
reduced by rewriting with the defining relations

    q a - (-1)^(aq) a q = q(a),    q r - (-1)^(qr) r q = [q, r].
"""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field
from typing import (
    Callable,
    Dict,
    Hashable,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
    Union,
)

from sympy import QQ

from ..exceptions import ContractViolation, NonTerminationError
from ..types import Caps, CheckRecord, Report
from ..utils.helpers import MemoTable
from . import faults
from .kernel import (
    ZERO,
    Coefficient,
    FormAlgebra,
    FormKey,
    GradedElement,
    Scalar,
    bilinear,
    parity_sign,
    to_qq,
)
from .operators import WeylClifford, derivation_residual
from .symmetric import Generator, SymmetricAlgebra

logger = logging.getLogger(__name__)

Evaluator = Callable[[GradedElement], GradedElement]


# ---------------------------------------------------------------------------
# Base algebras
# ---------------------------------------------------------------------------


class BasisKey(NamedTuple):
    name: str
    degree: int


class StructureConstantAlgebra:
    """
    Finite-dimensional graded commutative algebra from structure constants.

    ``table[(a, b)]`` maps basis names to coefficients of the product a b.
    Missing pairs multiply to zero.
    """

    def __init__(
        self,
        degrees: Mapping[str, int],
        table: Mapping[Tuple[str, str], Mapping[str, Scalar]],
        unit: str,
    ):
        if unit not in degrees:
            raise ContractViolation(f"unit {unit!r} is not a basis element")
        self.keys = {name: BasisKey(name, deg) for name, deg in degrees.items()}
        self.table = {
            pair: GradedElement({self.keys[n]: c for n, c in out.items()})
            for pair, out in table.items()
        }
        self.unit_key = self.keys[unit]
        self.one = GradedElement.monomial(self.unit_key)

    def product(self, k1: BasisKey, k2: BasisKey) -> GradedElement:
        if k1 == self.unit_key:
            return GradedElement.monomial(k2)
        if k2 == self.unit_key:
            return GradedElement.monomial(k1)
        return self.table.get((k1.name, k2.name), GradedElement())

    def multiply(self, a: GradedElement, b: GradedElement) -> GradedElement:
        return bilinear(self.product, a, b)

    def basis(self) -> List[BasisKey]:
        return sorted(self.keys.values())

    def verify(self) -> Optional[str]:
        """First violation of associativity or graded commutativity, if any."""
        keys = self.basis()
        mono = GradedElement.monomial
        for a, b in itertools.product(keys, repeat=2):
            swapped = self.product(b, a) * parity_sign(a.degree * b.degree)
            if self.product(a, b) != swapped:
                return f"{a.name} {b.name} is not graded commutative"
            if any(key.degree != a.degree + b.degree for key in self.product(a, b)):
                return f"{a.name} {b.name} breaks the grading"
        for a, b, c in itertools.product(keys, repeat=3):
            left = self.multiply(self.product(a, b), mono(c))
            if left != self.multiply(mono(a), self.product(b, c)):
                return f"({a.name} {b.name}) {c.name} != {a.name} ({b.name} {c.name})"
        return None


AlgebraDescriptor = Union[FormAlgebra, StructureConstantAlgebra]


# ---------------------------------------------------------------------------
# Differential operators and their order
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiffOp:
    """A normal-form operator with a declared order bound."""

    algebra: WeylClifford
    element: GradedElement
    order: int

    def __post_init__(self) -> None:
        actual = self.algebra.order(self.element)
        if actual is not None and actual > self.order:
            raise ContractViolation(
                f"operator of order {actual} declared as order {self.order}"
            )

    def __call__(self, form: GradedElement) -> GradedElement:
        return self.algebra.apply(self.element, form)


def compose(op1: DiffOp, op2: DiffOp) -> DiffOp:
    """op1 . op2, of order at most the sum of the orders."""
    if op1.algebra.forms != op2.algebra.forms:
        raise ContractViolation("operators over different algebras")
    element = op1.algebra.compose(op1.element, op2.element)
    return DiffOp(op1.algebra, element, op1.order + op2.order)


def _commutator_with(
    op: Evaluator, degree: int, a: GradedElement, multiply: Callable[..., GradedElement]
) -> Tuple[Evaluator, int]:
    a_degree = a.degree or 0
    sign = parity_sign(a_degree * degree)

    def evaluate(x: GradedElement) -> GradedElement:
        return multiply(a, op(x)) - op(multiply(a, x)) * sign

    return evaluate, degree + a_degree


def order_witness(
    op: Evaluator,
    k: int,
    probes: Sequence[GradedElement],
    multiply: Callable[[GradedElement, GradedElement], GradedElement],
    degree: int = 0,
) -> Optional[Tuple[Tuple[GradedElement, ...], GradedElement, GradedElement]]:
    """
    First (a_0..a_k, x) with (delta_{a_0} ... delta_{a_k} op)(x) != 0.

    delta_a op = [a, op] is the graded commutator with multiplication by a.
    Both the a's and x range over ``probes``.
    """
    if not probes:
        raise ContractViolation("the order test needs probes")
    for chosen in itertools.product(probes, repeat=k + 1):
        evaluate, current = op, degree
        for a in reversed(chosen):
            evaluate, current = _commutator_with(evaluate, current, a, multiply)
        for x in probes:
            value = evaluate(x)
            if value:
                return chosen, x, value
    return None


def diffop_order_test(
    op: Evaluator,
    k: int,
    probes: Sequence[GradedElement],
    multiply: Callable[[GradedElement, GradedElement], GradedElement],
    degree: int = 0,
) -> bool:
    """True iff every (k+1)-fold commutator of ``op`` vanishes on the probes."""
    return order_witness(op, k, probes, multiply, degree) is None


def monomial_probes(forms: FormAlgebra, max_degree: int) -> List[GradedElement]:
    """Monomials of polynomial degree <= max_degree times form monomials."""
    return [GradedElement.monomial(key) for key in forms.basis(max_degree)]


# ---------------------------------------------------------------------------
# Symbols
# ---------------------------------------------------------------------------


_SYMBOL_ALGEBRAS: Dict[FormAlgebra, SymmetricAlgebra] = {}


def symbol_algebra(weyl: WeylClifford) -> SymmetricAlgebra:
    """
    S_A Der A on the coordinate derivations.

    The odd derivatives d/dxi^k come first (degree -1), then the even ones.
    """
    forms = weyl.forms
    if forms not in _SYMBOL_ALGEBRAS:
        generators = [Generator(f"p_xi{k + 1}", -1) for k in range(forms.odd)]
        generators += [Generator(f"p_{name}", 0) for name in forms.context.names]
        _SYMBOL_ALGEBRAS[forms] = SymmetricAlgebra(forms, generators)
    return _SYMBOL_ALGEBRAS[forms]


def symbol(op: DiffOp, k: int) -> GradedElement:
    """The order-k part of ``op`` read as a symmetric tensor."""
    actual = op.algebra.order(op.element)
    if actual is not None and actual > k:
        raise ContractViolation(
            f"operator of order {actual} has no symbol of order {k}"
        )
    sym = symbol_algebra(op.algebra)
    odd = op.algebra.forms.odd
    terms = {}
    for key, coeff in op.algebra.order_part(op.element, k).items():
        exps = tuple(1 if i in key.odd else 0 for i in range(odd)) + key.even
        terms[sym.key(key.coeff, exps)] = coeff
    return GradedElement(terms)


def quantize(weyl: WeylClifford, s: GradedElement) -> GradedElement:
    """The normal-ordered operator of a symbol."""
    odd = weyl.forms.odd
    terms = {}
    for key, coeff in s.items():
        odd_part = tuple(i for i in range(odd) if key.exps[i])
        terms[weyl.key(key.coeff, odd_part, key.exps[odd:])] = coeff
    return GradedElement(terms)


def symbol_order(s: GradedElement) -> Optional[int]:
    return max((key.weight for key in s), default=None)


def poisson_bracket_symbols(
    weyl: WeylClifford, s1: GradedElement, l1: int, s2: GradedElement, l2: int
) -> GradedElement:
    """{s1, s2} = symbol of order l1 + l2 - 1 of [Q(s1), Q(s2)]."""
    commutator = weyl.commutator(quantize(weyl, s1), quantize(weyl, s2))
    return symbol(DiffOp(weyl, commutator, l1 + l2 - 1), l1 + l2 - 1)


def epsilon_k(
    weyl: WeylClifford, s: GradedElement, args: Sequence[GradedElement]
) -> GradedElement:
    """(delta_{a_1} ... delta_{a_k} Q(s)) 1 with delta_a = [a, -]."""
    op = quantize(weyl, s)
    for a in reversed(args):
        op = weyl.commutator(weyl.multiplication(a), op)
    return weyl.apply(op, weyl.forms.one)


# ---------------------------------------------------------------------------
# Lie-Rinehart presentations
# ---------------------------------------------------------------------------


class EnvKey(NamedTuple):
    """Normal word coeff * q_word with a non-decreasing ``word``."""

    coeff: FormKey
    word: Tuple[int, ...]
    degree: int

    @property
    def level(self) -> int:
        return len(self.word)


Letter = Tuple[int, Hashable]  # (0, FormKey) or (1, generator index)
BracketTable = Mapping[Tuple[int, int], GradedElement]


@dataclass
class LieRinehartPresentation:
    """
    A Lie-Rinehart algebra free over polynomial forms.

    ``brackets[(a, b)]`` is [q_a, q_b] as a level-one element (sum f q_c);
    pairs missing in one order are filled in by graded antisymmetry.
    ``anchors[a]`` is the derivation q_a of the base as an operator, and
    ``differential[a]``, when present, is delta_0 q_a.
    """

    base: FormAlgebra
    names: Tuple[str, ...]
    degrees: Tuple[int, ...]
    brackets: Dict[Tuple[int, int], GradedElement]
    anchors: Dict[int, GradedElement]
    differential: Optional[Dict[int, GradedElement]] = None
    kinds: Optional[Tuple[str, ...]] = None
    name: str = "Q"
    weyl: WeylClifford = field(init=False)

    def __post_init__(self) -> None:
        if len(self.names) != len(self.degrees):
            raise ContractViolation("one degree per generator is required")
        self.weyl = WeylClifford(self.base)
        self.size = len(self.names)
        self._normal = MemoTable(name=f"{self.name}.normal")

    # elements -------------------------------------------------------------------

    def key(self, coeff: FormKey, word: Tuple[int, ...]) -> EnvKey:
        return EnvKey(coeff, tuple(word), coeff.degree + sum(self.degrees[i] for i in word))

    def generator(self, index: int) -> GradedElement:
        return GradedElement.monomial(self.key(self.base.unit_key, (index,)))

    def embed(self, form: GradedElement) -> GradedElement:
        return GradedElement({self.key(k, ()): c for k, c in form.items()})

    def coefficient(
        self, element: GradedElement, word: Tuple[int, ...]
    ) -> GradedElement:
        return GradedElement({k.coeff: c for k, c in element.items() if k.word == word})

    def scale(self, form: GradedElement, element: GradedElement) -> GradedElement:
        """Left multiplication by a form; words are untouched."""
        terms: Dict[EnvKey, Coefficient] = {}
        for fk, fc in form.items():
            for key, c in element.items():
                product, sign = self.base.key_product(fk, key.coeff)
                if product is None:
                    continue
                out = self.key(product, key.word)
                terms[out] = terms.get(out, ZERO) + fc * c * sign
        return GradedElement(terms)

    def bracket_gen(self, a: int, b: int) -> GradedElement:
        if (a, b) in self.brackets:
            return self.brackets[(a, b)]
        if (b, a) in self.brackets:
            sign = -parity_sign(self.degrees[a] * self.degrees[b])
            return self.brackets[(b, a)] * sign
        return GradedElement()

    def anchor_gen(self, a: int, form: GradedElement) -> GradedElement:
        return self.weyl.apply(self.anchors.get(a, GradedElement()), form)

    # the Lie-Rinehart algebra Q -----------------------------------------------------

    def _check_level_one(self, element: GradedElement) -> None:
        if any(key.level != 1 for key in element):
            raise ContractViolation("expected an element of the module Q")

    def anchor(self, element: GradedElement, form: GradedElement) -> GradedElement:
        """(f q_a)(h) = f q_a(h)."""
        self._check_level_one(element)
        parts = []
        for key, c in element.items():
            image = self.anchor_gen(key.word[0], form)
            parts.append(self.base.multiply(GradedElement.monomial(key.coeff, c), image))
        return GradedElement.sum(parts)

    def _bracket_keys(self, k1: EnvKey, k2: EnvKey) -> GradedElement:
        a, b = k1.word[0], k2.word[0]
        f, g = GradedElement.monomial(k1.coeff), GradedElement.monomial(k2.coeff)
        fd, gd = k1.coeff.degree, k2.coeff.degree
        da, db = self.degrees[a], self.degrees[b]
        first = self.scale(
            self.base.multiply(f, self.anchor_gen(a, g)), self.generator(b)
        )
        middle = self.scale(self.base.multiply(f, g), self.bracket_gen(a, b)) * parity_sign(
            da * gd
        )
        last = self.scale(
            self.base.multiply(g, self.anchor_gen(b, f)), self.generator(a)
        ) * parity_sign((fd + da) * (gd + db))
        return first + middle - last

    def bracket(self, x: GradedElement, y: GradedElement) -> GradedElement:
        self._check_level_one(x)
        self._check_level_one(y)
        return bilinear(self._bracket_keys, x, y)

    def delta(self, element: GradedElement) -> GradedElement:
        """delta_0(f q) = (df) q + (-1)^f f delta_0(q)."""
        if self.differential is None:
            raise ContractViolation(f"{self.name} carries no differential")
        self._check_level_one(element)
        parts = []
        for key, c in element.items():
            f = GradedElement.monomial(key.coeff, c)
            parts.append(self.scale(self.base.d(f), self.generator(key.word[0])))
            image = self.differential.get(key.word[0], GradedElement())
            parts.append(self.scale(f, image) * parity_sign(key.coeff.degree))
        return GradedElement.sum(parts)

    def verify(self, probes: Sequence[GradedElement]) -> Report:
        """Lie-Rinehart axioms on generators, and delta_0 axioms when present."""
        report = Report(scenario=self.name, seed=0, caps=Caps())
        gens = range(self.size)
        deg = self.degrees

        def add(check: str, reference: str, witness: Optional[str]) -> None:
            record = CheckRecord(
                check_id=f"{self.name}.{check}",
                reference=reference,
                passed=witness is None,
                witness=witness,
            )
            if witness is not None:
                logger.warning("%s failed: %s", record.check_id, witness)
            report.add(record)

        def first(items: Sequence[Tuple[str, GradedElement]]) -> Optional[str]:
            for label, value in items:
                if value:
                    return f"{label} -> {value!r}"
            return None

        q = self.generator
        add(
            "antisymmetry",
            "[q_a, q_b] = -(-1)^(ab) [q_b, q_a]",
            first(
                [
                    (
                        f"({a},{b})",
                        self.bracket(q(a), q(b))
                        + self.bracket(q(b), q(a)) * parity_sign(deg[a] * deg[b]),
                    )
                    for a, b in itertools.product(gens, repeat=2)
                ]
            ),
        )
        add(
            "jacobi",
            "[q_a,[q_b,q_c]] = [[q_a,q_b],q_c] + (-1)^(ab) [q_b,[q_a,q_c]]",
            first(
                [
                    (
                        f"({a},{b},{c})",
                        self.bracket(q(a), self.bracket(q(b), q(c)))
                        - self.bracket(self.bracket(q(a), q(b)), q(c))
                        - self.bracket(q(b), self.bracket(q(a), q(c)))
                        * parity_sign(deg[a] * deg[b]),
                    )
                    for a, b, c in itertools.product(gens, repeat=3)
                ]
            ),
        )
        probe_keys = [key for p in probes for key in p]
        derivation_failures = [
            f"q{a}: {found!r}"
            for a in gens
            for found in [
                derivation_residual(self.weyl, self.anchors.get(a, GradedElement()), probe_keys)
            ]
            if found is not None
        ]
        add(
            "anchor_derivation",
            "q(fg) = q(f) g + (-1)^(qf) f q(g)",
            derivation_failures[0] if derivation_failures else None,
        )
        add(
            "anchor_morphism",
            "[q_a, q_b](h) = q_a(q_b(h)) - (-1)^(ab) q_b(q_a(h))",
            first(
                [
                    (
                        f"({a},{b}) on {h!r}",
                        self.anchor(self.bracket(q(a), q(b)), h)
                        - self.anchor_gen(a, self.anchor_gen(b, h))
                        + self.anchor_gen(b, self.anchor_gen(a, h))
                        * parity_sign(deg[a] * deg[b]),
                    )
                    for a, b in itertools.product(gens, repeat=2)
                    for h in probes
                ]
            ),
        )
        if self.differential is not None:
            add(
                "delta_square",
                "delta_0 delta_0 = 0",
                first([(f"q{a}", self.delta(self.delta(q(a)))) for a in gens]),
            )
            add(
                "delta_bracket",
                "delta_0 [q_a, q_b] = [delta_0 q_a, q_b] + (-1)^a [q_a, delta_0 q_b]",
                first(
                    [
                        (
                            f"({a},{b})",
                            self.delta(self.bracket(q(a), q(b)))
                            - self.bracket(self.delta(q(a)), q(b))
                            - self.bracket(q(a), self.delta(q(b))) * parity_sign(deg[a]),
                        )
                        for a, b in itertools.product(gens, repeat=2)
                    ]
                ),
            )
            add(
                "delta_subordinate",
                "(delta_0 q)(h) = d(q(h)) - (-1)^q q(dh)",
                first(
                    [
                        (
                            f"q{a} on {h!r}",
                            self.anchor(self.delta(q(a)), h)
                            - self.base.d(self.anchor_gen(a, h))
                            + self.anchor_gen(a, self.base.d(h)) * parity_sign(deg[a]),
                        )
                        for a in gens
                        for h in probes
                    ]
                ),
            )
        return report

    def symmetric_algebra(self) -> SymmetricAlgebra:
        kinds = self.kinds or ("bar",) * self.size
        return SymmetricAlgebra(
            self.base,
            [Generator(n, d, k) for n, d, k in zip(self.names, self.degrees, kinds)],
        )

    def format_key(self, key: EnvKey) -> str:
        parts = [self.base.format_key(key.coeff)]
        parts.extend(self.names[i] for i in key.word)
        return "*".join(parts)


def presentation_from_operators(
    base: FormAlgebra,
    names: Sequence[str],
    operators: Sequence[GradedElement],
    decompose: Callable[[GradedElement], Dict[int, GradedElement]],
    differential: Optional[GradedElement] = None,
    kinds: Optional[Sequence[str]] = None,
    name: str = "Der",
) -> LieRinehartPresentation:
    """
    The presentation of a free module of derivations from an operator frame.

    ``decompose`` writes a derivation operator in the frame as
    {generator index: form coefficient}. Brackets are commutators of the frame
    operators, and when ``differential`` (an odd derivation) is given,
    delta_0 q = [differential, q].
    """
    weyl = WeylClifford(base)
    degrees = []
    for op in operators:
        found = op.degrees()
        if len(found) != 1:
            raise ContractViolation("frame operators must be homogeneous")
        degrees.append(found[0])

    def as_level_one(parts: Dict[int, GradedElement]) -> GradedElement:
        terms: Dict[EnvKey, Coefficient] = {}
        for index, form in parts.items():
            for key, c in form.items():
                out = EnvKey(key, (index,), key.degree + degrees[index])
                terms[out] = terms.get(out, ZERO) + c
        return GradedElement(terms)

    brackets = {}
    for a, b in itertools.combinations_with_replacement(range(len(operators)), 2):
        commutator = weyl.commutator(operators[a], operators[b])
        if commutator:
            brackets[(a, b)] = as_level_one(decompose(commutator))
    delta = None
    if differential is not None:
        delta = {
            a: as_level_one(decompose(weyl.commutator(differential, op)))
            for a, op in enumerate(operators)
        }
    logger.debug("presentation %s with %d bracket entries", name, len(brackets))
    return LieRinehartPresentation(
        base,
        tuple(names),
        tuple(degrees),
        brackets,
        dict(enumerate(operators)),
        delta,
        None if kinds is None else tuple(kinds),
        name,
    )


# ---------------------------------------------------------------------------
# Normal ordering
# ---------------------------------------------------------------------------


STRATEGIES = ("leftmost", "rightmost")
DEFAULT_REWRITE_GUARD = 512
_HALF = QQ(1, 2)


def _is_form(letter: Letter) -> bool:
    return letter[0] == 0


def _redexes(pres: LieRinehartPresentation, word: Tuple[Letter, ...]) -> List[int]:
    found = []
    for i in range(len(word) - 1):
        left, right = word[i], word[i + 1]
        if _is_form(right):
            found.append(i)
        elif not _is_form(left):
            a, b = left[1], right[1]
            if a > b or (a == b and pres.degrees[a] % 2):  # type: ignore[operator]
                found.append(i)
    return found


def _rewrite(
    pres: LieRinehartPresentation, word: Tuple[Letter, ...], i: int
) -> List[Tuple[Tuple[Letter, ...], Coefficient]]:
    """One rewriting step at positions i, i+1."""
    head, (left, right), tail = word[:i], word[i : i + 2], word[i + 2 :]
    out: List[Tuple[Tuple[Letter, ...], Coefficient]] = []
    one = to_qq(1)
    if _is_form(left) and _is_form(right):
        product, sign = pres.base.key_product(left[1], right[1])  # type: ignore[arg-type]
        if product is not None:
            out.append((head + ((0, product),) + tail, one * sign))
        return out
    if _is_form(right):
        q, f = left[1], right[1]
        sign = parity_sign(pres.degrees[q] * f.degree)  # type: ignore[index, union-attr]
        out.append((head + (right, left) + tail, one * sign))
        for key, c in pres.anchor_gen(q, GradedElement.monomial(f)).items():  # type: ignore[arg-type]
            out.append((head + ((0, key),) + tail, c))
        return out
    b, a = left[1], right[1]
    bracket = pres.bracket_gen(b, a)  # type: ignore[arg-type]
    if a == b:
        for key, c in bracket.items():
            out.append((head + ((0, key.coeff), (1, key.word[0])) + tail, c * _HALF))
        return out
    sign = parity_sign(pres.degrees[a] * pres.degrees[b])  # type: ignore[index]
    out.append((head + (right, left) + tail, one * sign))
    if not faults.active("envelope.swap"):
        for key, c in bracket.items():
            out.append((head + ((0, key.coeff), (1, key.word[0])) + tail, c))
    return out


def _to_letters(pres: LieRinehartPresentation, key: EnvKey) -> Tuple[Letter, ...]:
    gens = tuple((1, i) for i in key.word)
    if key.coeff == pres.base.unit_key:
        return gens
    return ((0, key.coeff),) + gens


def _normal_key(pres: LieRinehartPresentation, word: Tuple[Letter, ...]) -> EnvKey:
    if word and _is_form(word[0]):
        return pres.key(word[0][1], tuple(l[1] for l in word[1:]))  # type: ignore[misc]
    return pres.key(pres.base.unit_key, tuple(l[1] for l in word))  # type: ignore[misc]


def _normalize(
    pres: LieRinehartPresentation,
    word: Tuple[Letter, ...],
    strategy: str,
    depth: int,
    guard: int,
) -> GradedElement:
    word = tuple(l for l in word if not (_is_form(l) and l[1] == pres.base.unit_key))
    redexes = _redexes(pres, word)
    if not redexes:
        return GradedElement.monomial(_normal_key(pres, word))
    if depth >= guard:
        raise NonTerminationError(
            f"rewriting in {pres.name} exceeded {guard} steps", element=word
        )

    def compute() -> GradedElement:
        i = redexes[0] if strategy == "leftmost" else redexes[-1]
        parts = [
            _normalize(pres, rewritten, strategy, depth + 1, guard) * c
            for rewritten, c in _rewrite(pres, word, i)
        ]
        return GradedElement.sum(parts)

    memo_key = (word, strategy, faults.active("envelope.swap"))
    return pres._normal.fetch(memo_key, compute)  # type: ignore[no-any-return]


def envelope_normal_form(
    word: Sequence[Union[int, FormKey]],
    pres: LieRinehartPresentation,
    strategy: str = "leftmost",
    guard: int = DEFAULT_REWRITE_GUARD,
) -> GradedElement:
    """
    Reduce a word of generator indices and form monomials to normal order.

    The reduction lowers (length, inversions) at every step; ``guard`` bounds
    the number of nested steps and a trip raises NonTerminationError.
    """
    if strategy not in STRATEGIES:
        raise ContractViolation(f"unknown strategy {strategy!r}")
    letters: List[Letter] = []
    for item in word:
        if isinstance(item, FormKey):
            letters.append((0, item))
        elif isinstance(item, int) and 0 <= item < pres.size:
            letters.append((1, item))
        else:
            raise ContractViolation(f"{item!r} is neither a form nor a generator")
    return _normalize(pres, tuple(letters), strategy, 0, guard)


def envelope_product(
    pres: LieRinehartPresentation,
    a: GradedElement,
    b: GradedElement,
    strategy: str = "leftmost",
) -> GradedElement:
    def product(k1: EnvKey, k2: EnvKey) -> GradedElement:
        word = _to_letters(pres, k1) + _to_letters(pres, k2)
        return _normalize(pres, word, strategy, 0, DEFAULT_REWRITE_GUARD)

    return bilinear(product, a, b)


def confluence_witness(
    pres: LieRinehartPresentation, words: Sequence[Sequence[Union[int, FormKey]]]
) -> Optional[str]:
    """First word whose leftmost and rightmost reductions differ."""
    for word in words:
        left = envelope_normal_form(word, pres, "leftmost")
        right = envelope_normal_form(word, pres, "rightmost")
        if left != right:
            return f"{tuple(word)!r}: {left!r} != {right!r}"
    return None


def gr_projection(
    pres: LieRinehartPresentation, e: GradedElement, level: int
) -> GradedElement:
    """The level-``level`` words of e as an element of S_A Q."""
    if any(key.level > level for key in e):
        raise ContractViolation(f"element does not lie in filtration level {level}")
    sym = pres.symmetric_algebra()
    terms = {}
    for key, c in e.items():
        if key.level == level:
            exps = tuple(key.word.count(i) for i in range(pres.size))
            terms[sym.key(key.coeff, exps)] = c
    return GradedElement(terms)


def augmentation(pres: LieRinehartPresentation, e: GradedElement) -> GradedElement:
    """The level-zero part of e, as a form."""
    return pres.coefficient(e, ())


def envelope_differential(
    pres: LieRinehartPresentation, e: GradedElement
) -> GradedElement:
    """The derivation extending d on A and delta_0 on Q, renormalized."""
    if pres.differential is None:
        raise ContractViolation(f"{pres.name} carries no differential")
    parts = []
    for key, c in e.items():
        f = GradedElement.monomial(key.coeff, c)
        tail = GradedElement.monomial(pres.key(pres.base.unit_key, key.word))
        parts.append(pres.scale(pres.base.d(f), tail))
        passed = key.coeff.degree
        for position, index in enumerate(key.word):
            head = pres.key(key.coeff, key.word[:position])
            rest = pres.key(pres.base.unit_key, key.word[position + 1 :])
            image = pres.differential.get(index, GradedElement())
            product = envelope_product(
                pres,
                envelope_product(pres, GradedElement.monomial(head, c), image),
                GradedElement.monomial(rest),
            )
            parts.append(product * parity_sign(passed))
            passed += pres.degrees[index]
    return GradedElement.sum(parts)


def envelope_to_operators(
    pres: LieRinehartPresentation, e: GradedElement
) -> GradedElement:
    """Evaluate normal words as operators: f q_1 ... q_k -> f . q_1 . ... . q_k."""
    weyl = pres.weyl
    parts = []
    for key, c in e.items():
        factors = [weyl.multiplication(GradedElement.monomial(key.coeff, c))]
        factors.extend(pres.anchors.get(i, GradedElement()) for i in key.word)
        parts.append(weyl.compose_all(factors))
    return GradedElement.sum(parts)


def envelope_report(
    pres: LieRinehartPresentation,
    samples: Sequence[Tuple[GradedElement, GradedElement]],
    words: Sequence[Sequence[Union[int, FormKey]]],
) -> List[CheckRecord]:
    """Confluence, morphism to operators and Gr commutativity on samples."""
    started = time.perf_counter()
    records = []
    witness = confluence_witness(pres, words)
    records.append(
        CheckRecord(
            f"{pres.name}.confluence",
            "leftmost and rightmost reductions agree",
            witness is None,
            witness,
            {"words": len(words)},
        )
    )
    weyl = pres.weyl
    morphism = None
    commutative = None
    for a, b in samples:
        ab = envelope_product(pres, a, b)
        expected = weyl.compose(envelope_to_operators(pres, a), envelope_to_operators(pres, b))
        if envelope_to_operators(pres, ab) != expected and morphism is None:
            morphism = f"{a!r} * {b!r}"
        la = max((k.level for k in a), default=0)
        lb = max((k.level for k in b), default=0)
        degree_a = a.degree or 0
        degree_b = b.degree or 0
        ba = envelope_product(pres, b, a) * parity_sign(degree_a * degree_b)
        if any(key.level >= la + lb for key in ab - ba) and commutative is None:
            commutative = f"{a!r}, {b!r}"
    records.append(
        CheckRecord(
            f"{pres.name}.operator_morphism",
            "U(Q) -> D(A) is an algebra morphism",
            morphism is None,
            morphism,
            {"pairs": len(samples)},
        )
    )
    records.append(
        CheckRecord(
            f"{pres.name}.gr_commutative",
            "[U_i, U_j] in U_(i+j-1)",
            commutative is None,
            commutative,
            {"pairs": len(samples)},
        )
    )
    records[-1].elapsed = time.perf_counter() - started
    return records
