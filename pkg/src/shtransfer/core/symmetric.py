"""
Graded symmetric algebras over polynomial forms.

S_A K is the graded symmetric algebra of a free module K over a free graded
commutative algebra A of polynomial forms. K has homogeneous generators split
into a retained part K-bar and a contractible part Z. A contraction of K onto
K-bar that is A-linear extends to S_A K: p and j as algebra morphisms, h as
(1/i) h' on the summand with i factors from Z, where h' is the derivation
extension of h.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

from ..exceptions import ContractViolation
from ..types import Caps
from .homotopy import Complex, ContractionData, GradedMap
from .kernel import (
    ONE,
    ZERO,
    FormAlgebra,
    FormKey,
    GradedElement,
    compositions,
    parity_sign,
    sort_odd,
    to_qq,
)

logger = logging.getLogger(__name__)


class SymKey(NamedTuple):
    """Monomial a * g^exps of S_A K; ``degree`` is fixed by the algebra."""

    coeff: FormKey
    exps: Tuple[int, ...]
    degree: int

    @property
    def weight(self) -> int:
        return sum(self.exps)


@dataclass(frozen=True)
class Generator:
    """A homogeneous free generator of K."""

    name: str
    degree: int
    kind: str = "bar"  # "bar" for K-bar, "z" for Z

    @property
    def odd(self) -> bool:
        return self.degree % 2 == 1


class SymmetricAlgebra:
    """Graded symmetric algebra S_A K with generators in a fixed order."""

    def __init__(self, coefficients: FormAlgebra, generators: Sequence[Generator]):
        self.coefficients = coefficients
        self.generators = tuple(generators)
        self.size = len(self.generators)
        self.zero_exps = (0,) * self.size
        self.unit_key = self.key(coefficients.unit_key, self.zero_exps)
        self.one = GradedElement.monomial(self.unit_key)

    # keys -------------------------------------------------------------------

    def key(self, coeff: FormKey, exps: Tuple[int, ...]) -> SymKey:
        degree = coeff.degree + sum(e * g.degree for e, g in zip(exps, self.generators))
        return SymKey(coeff, tuple(exps), degree)

    def gen_key(self, index: int, coeff: Optional[FormKey] = None) -> SymKey:
        exps = [0] * self.size
        exps[index] = 1
        return self.key(coeff or self.coefficients.unit_key, tuple(exps))

    def generator(self, index: int) -> GradedElement:
        return GradedElement.monomial(self.gen_key(index))

    def index(self, name: str) -> int:
        for i, gen in enumerate(self.generators):
            if gen.name == name:
                return i
        raise ContractViolation(f"unknown generator {name!r}")

    def embed(self, form: GradedElement) -> GradedElement:
        """A -> S_A K."""
        return GradedElement(
            {self.key(k, self.zero_exps): c for k, c in form.items()}
        )

    def coefficient_of(
        self, element: GradedElement, exps: Tuple[int, ...]
    ) -> GradedElement:
        """The A-coefficient of g^exps in ``element``."""
        return GradedElement({k.coeff: c for k, c in element.items() if k.exps == exps})

    def z_count(self, key: SymKey) -> int:
        return sum(e for e, g in zip(key.exps, self.generators) if g.kind == "z")

    def is_bar(self, key: SymKey) -> bool:
        return self.z_count(key) == 0

    def letters(self, key: SymKey) -> List[int]:
        """Generator indices of the monomial, in order, with repetition."""
        word: List[int] = []
        for index, power in enumerate(key.exps):
            word.extend([index] * power)
        return word

    def gens_degree(self, exps: Sequence[int]) -> int:
        return sum(e * g.degree for e, g in zip(exps, self.generators))

    # product ----------------------------------------------------------------

    def product(self, k1: SymKey, k2: SymKey) -> GradedElement:
        """(a1 g^E1)(a2 g^E2) = +-(a1 a2) g^(E1+E2)."""
        coeff, sign = self.coefficients.key_product(k1.coeff, k2.coeff)
        if coeff is None:
            return GradedElement()
        sign *= parity_sign(k2.coeff.degree * self.gens_degree(k1.exps))
        odd1 = [i for i in self.letters(k1) if self.generators[i].odd]
        odd2 = [i for i in self.letters(k2) if self.generators[i].odd]
        _, merge = sort_odd(odd1 + odd2)
        if not merge:
            return GradedElement()
        exps = tuple(a + b for a, b in zip(k1.exps, k2.exps))
        return GradedElement.monomial(self.key(coeff, exps), sign * merge)

    def multiply(self, a: GradedElement, b: GradedElement) -> GradedElement:
        acc: Dict[SymKey, object] = {}
        for k1, c1 in a.items():
            for k2, c2 in b.items():
                for key, c in self.product(k1, k2).items():
                    acc[key] = acc.get(key, ZERO) + c1 * c2 * c
        return GradedElement(acc)

    def multiply_all(self, factors: Sequence[GradedElement]) -> GradedElement:
        result = self.one
        for factor in factors:
            result = self.multiply(result, factor)
        return result

    def power(self, element: GradedElement, exponent: int) -> GradedElement:
        return self.multiply_all([element] * exponent)

    # extensions of maps -------------------------------------------------------

    def derivation(
        self,
        degree: int,
        on_coeff: Optional[Callable[[FormKey], GradedElement]],
        on_gen: Callable[[int], GradedElement],
    ) -> Callable[[SymKey], GradedElement]:
        """
        Extend a degree-``degree`` derivation from A and the generators.

        ``on_coeff`` returns form elements (None means zero on A); ``on_gen``
        returns elements of S_A K.
        """

        def act(key: SymKey) -> GradedElement:
            word = self.letters(key)
            letters = [self.generator(i) for i in word]
            parts = []
            if on_coeff is not None:
                head = self.embed(on_coeff(key.coeff))
                parts.append(self.multiply(head, self.multiply_all(letters)))
            head_sign = parity_sign(degree * key.coeff.degree)
            coeff = GradedElement.monomial(self.key(key.coeff, self.zero_exps))
            passed = 0
            for k, index in enumerate(word):
                image = on_gen(index)
                if image:
                    sign = head_sign * parity_sign(degree * passed)
                    factors = [coeff] + letters[:k] + [image] + letters[k + 1 :]
                    parts.append(self.multiply_all(factors) * sign)
                passed += self.generators[index].degree
            return GradedElement.sum(parts)

        return act

    def morphism(
        self, on_gen: Callable[[int], GradedElement]
    ) -> Callable[[SymKey], GradedElement]:
        """Extend an A-linear degree-0 algebra morphism from the generators."""

        def act(key: SymKey) -> GradedElement:
            coeff = GradedElement.monomial(self.key(key.coeff, self.zero_exps))
            return self.multiply_all([coeff] + [on_gen(i) for i in self.letters(key)])

        return act

    # enumeration --------------------------------------------------------------

    def basis(
        self,
        max_weight: int,
        max_degree: int,
        max_form: Optional[int] = None,
        bar_only: bool = False,
        exact_weight: Optional[int] = None,
    ) -> List[SymKey]:
        """Monomials up to the given weight and polynomial degree."""
        forms = self.coefficients.basis(max_degree, max_form)
        weights = [exact_weight] if exact_weight is not None else range(max_weight + 1)
        keys = []
        for weight in weights:
            for exps in compositions(weight, self.size):
                if any(
                    e > 1 and g.odd for e, g in zip(exps, self.generators)
                ) or (
                    bar_only and any(e and g.kind == "z" for e, g in zip(exps, self.generators))
                ):
                    continue
                keys.extend(self.key(form, exps) for form in forms)
        return keys

    def format_key(self, key: SymKey) -> str:
        parts = [self.coefficients.format_key(key.coeff)]
        for gen, power in zip(self.generators, key.exps):
            if power == 1:
                parts.append(gen.name)
            elif power:
                parts.append(f"{gen.name}^{power}")
        return "*".join(parts)


@dataclass
class SymmetricSplit:
    """
    A-linear contraction data of K onto K-bar, given on generators.

    ``delta_gens(i)`` is d0 of generator i, ``h_gens(i)`` is h0 of generator i
    (nonzero only on Z) and ``p_gens(i)`` is p0 of generator i (generator i
    itself on K-bar, zero on Z).
    """

    algebra: SymmetricAlgebra
    delta_gens: Callable[[int], GradedElement]
    h_gens: Callable[[int], GradedElement]
    p_gens: Callable[[int], GradedElement]
    name: str = "S"

    def validate(self) -> None:
        alg = self.algebra
        for index, gen in enumerate(alg.generators):
            h_image, p_image = self.h_gens(index), self.p_gens(index)
            if gen.kind == "bar":
                if h_image:
                    raise ContractViolation(f"h0 does not vanish on {gen.name}")
                if p_image != alg.generator(index):
                    raise ContractViolation(
                        f"p0 moves the retained generator {gen.name}"
                    )
            elif p_image:
                raise ContractViolation(f"p0 does not vanish on {gen.name}")
            for key in list(h_image) + list(p_image) + list(self.delta_gens(index)):
                if key.weight != 1:
                    raise ContractViolation(
                        f"generator data for {gen.name} leaves K: {key!r}"
                    )

    # maps on S_A K --------------------------------------------------------------

    def differential(self) -> GradedMap:
        alg = self.algebra
        return GradedMap(
            1,
            alg.derivation(1, alg.coefficients.differential, self.delta_gens),
            f"d_{self.name}",
        )

    def h_prime(self) -> GradedMap:
        alg = self.algebra
        return GradedMap(-1, alg.derivation(-1, None, self.h_gens), f"h'_{self.name}")

    def homotopy(self) -> GradedMap:
        alg = self.algebra
        h_prime = self.h_prime()

        def act(key: SymKey) -> GradedElement:
            count = alg.z_count(key)
            if count == 0:
                return GradedElement()
            return h_prime.on_key(key) * to_qq(ONE / count)

        return GradedMap(-1, act, f"h0_{self.name}")

    def projection(self) -> GradedMap:
        alg = self.algebra
        return GradedMap(0, alg.morphism(self.p_gens), f"p0_{self.name}")

    def inclusion(self) -> GradedMap:
        alg = self.algebra

        def act(key: SymKey) -> GradedElement:
            if not alg.is_bar(key):
                raise ContractViolation(f"{key!r} is not in S_A K-bar")
            return GradedElement.monomial(key)

        return GradedMap(0, act, f"j0_{self.name}")

    def complexes(self, weight: Optional[int] = None) -> Tuple[Complex, Complex]:
        """Big and small complexes, optionally restricted to one weight."""
        alg = self.algebra
        differential = self.differential()

        def big_basis(caps: Caps) -> List[SymKey]:
            return alg.basis(caps.max_order, caps.max_degree, caps.max_form_degree, exact_weight=weight)

        def small_basis(caps: Caps) -> List[SymKey]:
            return alg.basis(
                caps.max_order,
                caps.max_degree,
                caps.max_form_degree,
                bar_only=True,
                exact_weight=weight,
            )

        def weight_of(key: SymKey) -> int:
            return key.weight

        big = Complex(self.name, big_basis, differential, weight_of)
        small = Complex(f"{self.name}_bar", small_basis, differential, weight_of)
        return big, small

    def linear_contraction(self) -> ContractionData:
        """The contraction of K onto K-bar itself (symmetric weight 1)."""
        self.validate()
        big, small = self.complexes(weight=1)
        return ContractionData(big, small, self.projection(), self.inclusion(), self.h_prime())


def extend_contraction_symmetric(
    c: ContractionData, split: SymmetricSplit, caps: Optional[Caps] = None
) -> ContractionData:
    """
    Extend an A-linear contraction of K onto K-bar to S_A K onto S_A K-bar.

    When ``caps`` is given, ``c`` is checked against the generator data of
    ``split`` on every weight-one basis key, which is where A-linearity of p,
    j and h is decided.
    """
    split.validate()
    alg = split.algebra
    if caps is not None:
        reference = split.linear_contraction()
        for key in c.big.basis(caps):
            if key.weight != 1:
                continue
            for mine, theirs in ((c.p, reference.p), (c.h, reference.h)):
                if mine.on_key(key) != theirs.on_key(key):
                    raise ContractViolation(
                        f"{mine.name} is not A-linear on the generators at {alg.format_key(key)}"
                    )
    big, small = split.complexes()
    logger.info("extended contraction %s to symmetric algebras", split.name)
    return ContractionData(big, small, split.projection(), split.inclusion(), split.homotopy())


def weight_components(element: GradedElement) -> Dict[int, GradedElement]:
    """Split an element of S_A K by symmetric weight."""
    parts: Dict[int, Dict[SymKey, object]] = {}
    for key, coeff in element.items():
        parts.setdefault(key.weight, {})[key] = coeff
    return {w: GradedElement(terms) for w, terms in parts.items()}


def symmetric_words(exps: Sequence[int]) -> List[Tuple[int, ...]]:
    """Distinct orderings of the multiset with multiplicities ``exps``."""
    letters: List[int] = []
    for index, power in enumerate(exps):
        letters.extend([index] * power)
    return sorted(set(itertools.permutations(letters)))
