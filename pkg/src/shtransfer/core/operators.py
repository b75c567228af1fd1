"""
Coordinate differential operators on polynomial forms.

An operator is kept in the normal form

    omega * d/dxi^K * d^E

with ``omega`` a polynomial form on the left, the odd derivatives d/dxi^k
(left derivatives by the odd generators) in increasing order, and the even
partial derivatives on the right. Composition moves letters to normal order
with the Leibniz rule for even letters and d/dxi omega = (d/dxi omega) +
(-1)^|omega| omega d/dxi for odd ones. Without odd generators this is the
Weyl algebra of the polynomial ring.
"""

from __future__ import annotations

import logging
from typing import Callable, Dict, Iterable, List, Mapping, NamedTuple, Optional, Tuple

from ..exceptions import ContractViolation
from ..utils.helpers import MemoTable
from .kernel import (
    ZERO,
    Coefficient,
    FormAlgebra,
    FormKey,
    GradedElement,
    bilinear,
    parity_sign,
    sort_odd,
)

logger = logging.getLogger(__name__)


class OpKey(NamedTuple):
    """Normal-form monomial omega * d/dxi^odd * d^even."""

    coeff: FormKey
    odd: Tuple[int, ...]
    even: Tuple[int, ...]

    @property
    def degree(self) -> int:
        return len(self.coeff.forms) - len(self.odd)

    @property
    def order(self) -> int:
        return len(self.odd) + sum(self.even)


class WeylClifford:
    """Graded Weyl-Clifford algebra of a form algebra, acting on it."""

    def __init__(self, forms: FormAlgebra):
        self.forms = forms
        self.size = forms.context.size
        self.zero_even = (0,) * self.size
        self.unit_key = OpKey(forms.unit_key, (), self.zero_even)
        self.one = GradedElement.monomial(self.unit_key)
        self._letters = MemoTable(name="weyl.letters")
        self._products = MemoTable(name="weyl.products")

    # construction -------------------------------------------------------------

    def key(
        self,
        coeff: Optional[FormKey] = None,
        odd: Tuple[int, ...] = (),
        even: Optional[Tuple[int, ...]] = None,
    ) -> OpKey:
        return OpKey(
            coeff or self.forms.unit_key,
            tuple(odd),
            self.zero_even if even is None else tuple(even),
        )

    def multiplication(self, form: GradedElement) -> GradedElement:
        """The operator of left multiplication by ``form``."""
        return GradedElement({self.key(k): c for k, c in form.items()})

    def even_derivative(self, index: int) -> GradedElement:
        even = [0] * self.size
        even[index] = 1
        return GradedElement.monomial(self.key(even=tuple(even)))

    def odd_derivative(self, index: int) -> GradedElement:
        if not 0 <= index < self.forms.odd:
            raise ContractViolation(f"no odd generator with index {index}")
        return GradedElement.monomial(self.key(odd=(index,)))

    def vector_field(self, components: Mapping[int, GradedElement]) -> GradedElement:
        """sum_i f_i d/dvar_i for form-valued components ``f_i``."""
        parts = [
            self.compose(self.multiplication(value), self.even_derivative(index))
            for index, value in components.items()
        ]
        return GradedElement.sum(parts)

    def odd_vector_field(
        self, components: Mapping[int, GradedElement]
    ) -> GradedElement:
        """sum_k f_k d/dxi^k."""
        parts = [
            self.compose(self.multiplication(value), self.odd_derivative(index))
            for index, value in components.items()
        ]
        return GradedElement.sum(parts)

    # composition ----------------------------------------------------------------

    def _left_even(self, index: int, key: OpKey) -> GradedElement:
        def compute() -> GradedElement:
            terms: Dict[OpKey, Coefficient] = {}
            for form, coeff in self.forms.partial(key.coeff, index).items():
                terms[OpKey(form, key.odd, key.even)] = coeff
            even = list(key.even)
            even[index] += 1
            shifted = OpKey(key.coeff, key.odd, tuple(even))
            terms[shifted] = terms.get(shifted, ZERO) + 1
            return GradedElement(terms)

        return self._letters.fetch(("even", index, key), compute)

    def _left_odd(self, index: int, key: OpKey) -> GradedElement:
        def compute() -> GradedElement:
            terms: Dict[OpKey, Coefficient] = {}
            for form, coeff in self.forms.odd_derivative(key.coeff, index).items():
                terms[OpKey(form, key.odd, key.even)] = coeff
            merged, sign = sort_odd((index,) + key.odd)
            if sign:
                moved = OpKey(key.coeff, merged, key.even)
                value = sign * parity_sign(key.coeff.degree)
                terms[moved] = terms.get(moved, ZERO) + value
            return GradedElement(terms)

        return self._letters.fetch(("odd", index, key), compute)

    def _left_form(self, form: FormKey, element: GradedElement) -> GradedElement:
        terms: Dict[OpKey, Coefficient] = {}
        for key, coeff in element.items():
            product, sign = self.forms.key_product(form, key.coeff)
            if product is None:
                continue
            out = OpKey(product, key.odd, key.even)
            terms[out] = terms.get(out, ZERO) + coeff * sign
        return GradedElement(terms)

    def compose_keys(self, a: OpKey, b: OpKey) -> GradedElement:
        def compute() -> GradedElement:
            current = GradedElement.monomial(b)
            for index, power in enumerate(a.even):
                for _ in range(power):
                    current = current.apply(lambda k, i=index: self._left_even(i, k))
            for index in reversed(a.odd):
                current = current.apply(lambda k, i=index: self._left_odd(i, k))
            return self._left_form(a.coeff, current)

        return self._products.fetch((a, b), compute)

    def compose(self, a: GradedElement, b: GradedElement) -> GradedElement:
        return bilinear(self.compose_keys, a, b)

    def compose_all(self, factors: Iterable[GradedElement]) -> GradedElement:
        result = self.one
        for factor in factors:
            result = self.compose(result, factor)
        return result

    def commutator_keys(self, a: OpKey, b: OpKey) -> GradedElement:
        sign = parity_sign(a.degree * b.degree)
        return self.compose_keys(a, b) - self.compose_keys(b, a) * sign

    def commutator(self, a: GradedElement, b: GradedElement) -> GradedElement:
        """Graded commutator [a, b] = a b - (-1)^(|a||b|) b a."""
        return bilinear(self.commutator_keys, a, b)

    # action on forms --------------------------------------------------------------

    def apply_key(self, op: OpKey, form: FormKey) -> GradedElement:
        current = GradedElement.monomial(form)
        for index, power in enumerate(op.even):
            for _ in range(power):
                current = current.apply(lambda k, i=index: self.forms.partial(k, i))
        for index in reversed(op.odd):
            current = current.apply(lambda k, i=index: self.forms.odd_derivative(k, i))
        return self.forms.multiply(GradedElement.monomial(op.coeff), current)

    def apply(self, op: GradedElement, form: GradedElement) -> GradedElement:
        return bilinear(self.apply_key, op, form)

    # order ----------------------------------------------------------------------

    def order(self, op: GradedElement) -> Optional[int]:
        """Highest order among the terms, None for the zero operator."""
        return max((key.order for key in op), default=None)

    def order_part(self, op: GradedElement, order: int) -> GradedElement:
        return op.filter(lambda key: key.order == order)

    def restrict_to_functions(self, op: GradedElement) -> GradedElement:
        """Drop the terms with odd derivatives, which vanish on functions."""
        return op.filter(lambda key: not key.odd)

    def format_key(self, key: OpKey) -> str:
        parts = [self.forms.format_key(key.coeff)]
        parts.extend(f"d/dxi{k + 1}" for k in key.odd)
        for name, power in zip(self.forms.context.names, key.even):
            if power == 1:
                parts.append(f"d/d{name}")
            elif power:
                parts.append(f"d/d{name}^{power}")
        return "*".join(parts)


def operator_from_callable(
    algebra: WeylClifford,
    action: Callable[[GradedElement], GradedElement],
    degree: int,
) -> GradedElement:
    """
    Recover a derivation operator from its values on the generators.

    ``action`` must be a graded derivation of the given degree; the operator
    sum_i D(x_i) d/dx_i + sum_k D(xi^k) d/dxi^k is returned.
    """
    forms = algebra.forms
    even: Dict[int, GradedElement] = {}
    odd: Dict[int, GradedElement] = {}
    for index in range(forms.context.size):
        value = action(GradedElement.monomial(forms.variable(index)))
        if value:
            even[index] = value
    for index in range(forms.odd):
        value = action(GradedElement.monomial(forms.dx(index)))
        if value:
            odd[index] = value
    if action(forms.one):
        raise ContractViolation("a derivation must vanish on the unit")
    logger.debug("recovered derivation of degree %d", degree)
    return algebra.vector_field(even) + algebra.odd_vector_field(odd)


def derivation_residual(
    algebra: WeylClifford,
    op: GradedElement,
    probes: List[FormKey],
) -> Optional[Tuple[FormKey, FormKey, GradedElement]]:
    """First probe pair violating the graded Leibniz rule, if any."""
    forms = algebra.forms
    for degree in op.degrees():
        part = op.filter(lambda key, d=degree: key.degree == d)
        for f in probes:
            for g in probes:
                fe, ge = GradedElement.monomial(f), GradedElement.monomial(g)
                lhs = algebra.apply(part, forms.multiply(fe, ge))
                rhs = forms.multiply(algebra.apply(part, fe), ge) + forms.multiply(
                    fe, algebra.apply(part, ge)
                ) * parity_sign(degree * f.degree)
                if lhs != rhs:
                    return f, g, lhs - rhs
    return None
