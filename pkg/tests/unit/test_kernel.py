"""
Tests for the exact algebra kernel.

This module tests Koszul signs, unshuffles, multi-indices, graded linear
combinations and the algebra of polynomial forms.
"""

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sympy import QQ

from shtransfer.core import faults
from shtransfer.core.kernel import (
    FormAlgebra,
    FormKey,
    GradedElement,
    MultiIndex,
    PolyContext,
    bilinear,
    compositions,
    koszul_sign,
    multilinear,
    parity_sign,
    poly_ops,
    unshuffles,
    wedge_and_sym_product,
)
from shtransfer.exceptions import ConfigurationError, ContractViolation

pytestmark = pytest.mark.unit


class TestKoszulSign:
    """Test the sign of a reordering of graded elements."""

    def test_identity_is_positive(self):
        assert koszul_sign((1, 2, 3), (0, 1, 1)) == 1

    def test_transposition_of_even_elements(self):
        """Even elements anticommute under the antisymmetric rule."""
        assert koszul_sign((2, 1), (0, 0)) == -1
        assert koszul_sign((2, 1), (0, 0), antisymmetric=False) == 1

    def test_transposition_of_odd_elements(self):
        assert koszul_sign((2, 1), (1, 1)) == 1
        assert koszul_sign((2, 1), (1, 1), antisymmetric=False) == -1

    def test_three_cycle(self):
        assert koszul_sign((2, 3, 1), (0, 0, 0)) == 1
        assert koszul_sign((2, 3, 1), (1, 0, 1), antisymmetric=False) == -1

    def test_length_mismatch(self):
        with pytest.raises(ContractViolation):
            koszul_sign((1, 2), (0,))

    def test_not_a_permutation(self):
        with pytest.raises(ContractViolation):
            koszul_sign((1, 1), (0, 0))

    @pytest.mark.property
    @settings(max_examples=60, deadline=None)
    @given(
        st.permutations([1, 2, 3, 4]),
        st.permutations([1, 2, 3, 4]),
        st.lists(st.integers(-2, 2), min_size=4, max_size=4),
    )
    def test_sign_is_multiplicative(self, sigma, tau, degrees):
        """chi(sigma . tau, v) = chi(tau, v_sigma) chi(sigma, v)."""
        composed = tuple(sigma[t - 1] for t in tau)
        permuted = [degrees[s - 1] for s in sigma]
        expected = koszul_sign(tau, permuted) * koszul_sign(sigma, degrees)
        assert koszul_sign(composed, degrees) == expected

    def test_fault_flips_nontrivial_permutations(self):
        with faults.inject_fault("kernel.koszul"):
            assert koszul_sign((2, 1), (0, 0)) == 1
            assert koszul_sign((1, 2), (0, 0)) == 1
        assert koszul_sign((2, 1), (0, 0)) == -1

    def test_unknown_fault(self):
        with pytest.raises(ConfigurationError):
            with faults.inject_fault("kernel.nothing"):
                pass


class TestUnshuffles:
    """Test unshuffle enumeration."""

    def test_counts_are_binomial(self):
        assert len(unshuffles(2, 1)) == 3
        assert len(unshuffles(2, 2)) == 6
        assert len(unshuffles(1, 1, 1)) == 6

    def test_increasing_on_blocks(self):
        for perm in unshuffles(2, 3):
            assert list(perm[:2]) == sorted(perm[:2])
            assert list(perm[2:]) == sorted(perm[2:])

    def test_ordered_variant(self):
        ordered = unshuffles(2, 2, ordered=True)
        assert len(ordered) == 3
        assert all(perm[0] < perm[2] for perm in ordered)

    def test_rejects_empty_blocks(self):
        with pytest.raises(ContractViolation):
            unshuffles(0, 2)


class TestMultiIndex:
    """Test canonical multi-indices."""

    def test_antisymmetric_sort_sign(self):
        index = MultiIndex.canonical("antisymmetric", (3, 1, 2))
        assert index.entries == (1, 2, 3)
        assert index.sign == 1
        assert MultiIndex.canonical("antisymmetric", (2, 1)).sign == -1

    def test_repeated_odd_entry_is_zero(self):
        assert MultiIndex.canonical("antisymmetric", (1, 1)).is_zero

    def test_symmetric_product(self):
        a = MultiIndex.canonical("symmetric", (2,))
        b = MultiIndex.canonical("symmetric", (1, 2))
        product, sign = wedge_and_sym_product(a, b)
        assert product.entries == (1, 2, 2)
        assert sign == 1

    def test_kind_mismatch(self):
        with pytest.raises(ContractViolation):
            wedge_and_sym_product(
                MultiIndex.canonical("symmetric", (1,)),
                MultiIndex.canonical("antisymmetric", (1,)),
            )


class TestPolyContext:
    """Test polynomial parsing."""

    def test_names(self):
        assert PolyContext(2, 1).names == ("x1", "x2", "u1")

    def test_parse(self):
        context = PolyContext(1, 2)
        poly = context.parse("x1*u2**2 + 1/2*u1")
        x1, u1, u2 = context.ring.gens
        assert poly == x1 * u2**2 + QQ(1, 2) * u1

    def test_parse_rejects_unknown_variable(self):
        with pytest.raises(ContractViolation):
            PolyContext(1, 1).parse("y*x1")

    def test_parse_rejects_garbage(self):
        with pytest.raises(ContractViolation):
            PolyContext(1, 1).parse("x1 +* u1")

    @pytest.mark.parametrize("text", ["0.1*u2", "1e400*u2", "x1 + 2.0"])
    def test_parse_rejects_float_literals(self, text):
        with pytest.raises(ContractViolation, match="not exact"):
            PolyContext(1, 2).parse(text)

    def test_parse_keeps_rationals_exact(self):
        context = PolyContext(1, 2)
        u2 = context.ring.gens[2]
        assert context.parse("1/10*u2") == QQ(1, 10) * u2

    def test_poly_ops(self):
        context = PolyContext(1, 1)
        x1, u1 = context.ring.gens
        assert poly_ops(x1, u1, "mul") == x1 * u1
        assert poly_ops(x1**2 * u1, x1, "partial") == 2 * x1 * u1
        with pytest.raises(ContractViolation):
            poly_ops(x1, x1 + 1, "partial")
        with pytest.raises(ContractViolation):
            poly_ops(x1, PolyContext(2, 0).ring.gens[0], "add")


class TestGradedElement:
    """Test sparse graded linear combinations."""

    def test_zero_coefficients_are_dropped(self):
        element = GradedElement({FormKey((1,), ()): 0})
        assert not element
        assert element == 0

    def test_arithmetic(self):
        k = FormKey((1,), ())
        a = GradedElement.monomial(k, 2)
        b = GradedElement.monomial(k, QQ(1, 2))
        assert (a - b).coefficient(k) == QQ(3, 2)
        assert (a * QQ(1, 4)).coefficient(k) == QQ(1, 2)
        assert (3 * a).coefficient(k) == 6
        assert not (a - a)

    def test_from_terms_accumulates(self):
        k = FormKey((0,), ())
        assert GradedElement.from_terms([(k, 1), (k, 2)]).coefficient(k) == 3

    def test_degree(self):
        a = GradedElement.monomial(FormKey((0,), (0,)))
        assert a.degree == 1
        assert GradedElement().degree is None
        mixed = a + GradedElement.monomial(FormKey((0,), ()))
        with pytest.raises(ContractViolation):
            _ = mixed.degree
        assert len(mixed.homogeneous_parts()) == 2

    def test_hash_matches_equality(self):
        k = FormKey((2,), ())
        assert hash(GradedElement.monomial(k, 1)) == hash(GradedElement({k: QQ(1)}))

    def test_multilinear_extension(self):
        forms = FormAlgebra(PolyContext(1, 0), odd=1)
        x = GradedElement.monomial(forms.variable(0))
        one = forms.one

        def triple(a, b, c):
            return forms.multiply(forms.product(a, b), GradedElement.monomial(c))

        total = multilinear(triple, [x + one, x, x])
        assert total == forms.multiply(forms.multiply(x + one, x), x)
        assert bilinear(forms.product, x, one) == x


class TestFormAlgebra:
    """Test the algebra of polynomial forms."""

    @pytest.fixture
    def forms(self):
        return FormAlgebra(PolyContext(2, 1), odd=2)

    def test_dx_anticommute(self, forms):
        dx1 = GradedElement.monomial(forms.dx(0))
        dx2 = GradedElement.monomial(forms.dx(1))
        assert forms.multiply(dx1, dx2) == -forms.multiply(dx2, dx1)
        assert not forms.multiply(dx1, dx1)

    def test_differential_squares_to_zero(self, forms):
        for key in forms.basis(3):
            assert not forms.d(forms.differential(key))

    def test_differential_ignores_transverse_variables(self, forms):
        u = GradedElement.monomial(forms.variable(2))
        assert not forms.d(u)

    def test_leibniz(self, forms):
        keys = forms.basis(2)
        for k1, k2 in itertools.product(keys[:12], repeat=2):
            a, b = GradedElement.monomial(k1), GradedElement.monomial(k2)
            lhs = forms.d(forms.multiply(a, b))
            sign = parity_sign(k1.degree)
            rhs = forms.multiply(forms.d(a), b) + forms.multiply(a, forms.d(b)) * sign
            assert lhs == rhs

    def test_odd_derivative_sign(self, forms):
        key = FormKey((0, 0, 0), (0, 1))
        assert forms.odd_derivative(key, 1) == GradedElement.monomial(
            FormKey((0, 0, 0), (0,)), -1
        )

    def test_poly_round_trip(self, forms):
        poly = forms.context.parse("x1**2*u1 - 3*x2")
        assert forms.to_poly(forms.from_poly(poly)) == poly

    def test_basis_respects_max_form(self, forms):
        assert all(key.degree <= 1 for key in forms.basis(1, max_form=1))
        assert len(forms.basis(0)) == 4

    def test_format_key(self, forms):
        key = FormKey((2, 0, 1), (0, 1))
        assert forms.format_key(key) == "x1^2*u1*dx1^dx2"
        assert forms.format_key(forms.unit_key) == "1"

    def test_compositions(self):
        assert sorted(compositions(2, 2)) == [(0, 2), (1, 1), (2, 0)]
