"""
Tests for the order calculus, principal symbols and the enveloping algebra
of the derivations of leafwise forms.
"""

import pytest

from shtransfer.core import faults
from shtransfer.core.envelope import (
    DiffOp,
    StructureConstantAlgebra,
    augmentation,
    compose,
    confluence_witness,
    diffop_order_test,
    envelope_differential,
    envelope_normal_form,
    envelope_product,
    envelope_report,
    envelope_to_operators,
    epsilon_k,
    gr_projection,
    monomial_probes,
    order_witness,
    poisson_bracket_symbols,
    quantize,
    symbol,
    symbol_algebra,
    symbol_order,
)
from shtransfer.core.foliation import derivation_presentation
from shtransfer.core.kernel import FormAlgebra, GradedElement, PolyContext
from shtransfer.core.operators import WeylClifford
from shtransfer.exceptions import ContractViolation, NonTerminationError

pytestmark = pytest.mark.unit

mono = GradedElement.monomial

THETA, ZETA, ETA1, ETA2 = 0, 1, 2, 3


@pytest.fixture
def line():
    return FormAlgebra(PolyContext(1, 0), odd=1)


@pytest.fixture(scope="module")
def pres(f1):
    """Der of leafwise forms of F1 on the frame theta1, zeta1, eta1, eta2."""
    return derivation_presentation(f1)


class TestStructureConstants:
    """Test base algebras given by structure constants."""

    def test_dual_numbers(self):
        algebra = StructureConstantAlgebra({"1": 0, "e": 1}, {}, "1")
        assert algebra.verify() is None
        e = mono(algebra.keys["e"])
        assert algebra.multiply(algebra.one, e) == e
        assert not algebra.multiply(e, e)

    def test_grading_is_checked(self):
        table = {("e", "e"): {"1": 1}}
        algebra = StructureConstantAlgebra({"1": 0, "e": 2}, table, "1")
        assert "grading" in algebra.verify()

    def test_unit_must_be_a_basis_element(self):
        with pytest.raises(ContractViolation):
            StructureConstantAlgebra({"e": 1}, {}, "1")


class TestOrder:
    """Test the commutator order test."""

    def test_second_derivative(self, line):
        weyl = WeylClifford(line)
        d2 = weyl.compose(weyl.even_derivative(0), weyl.even_derivative(0))
        op = DiffOp(weyl, d2, 2)
        probes = monomial_probes(line, 1)
        assert diffop_order_test(op, 2, probes, line.multiply)
        found = order_witness(op, 1, probes, line.multiply)
        assert found is not None
        chosen, _, value = found
        assert len(chosen) == 2
        assert value

    def test_declared_order_is_enforced(self, weyl):
        d2 = weyl.compose(weyl.even_derivative(0), weyl.even_derivative(1))
        with pytest.raises(ContractViolation):
            DiffOp(weyl, d2, 1)

    def test_compose_adds_orders(self, weyl):
        d = DiffOp(weyl, weyl.even_derivative(0), 1)
        assert compose(d, d).order == 2

    def test_probes_are_required(self, forms, weyl):
        with pytest.raises(ContractViolation):
            order_witness(DiffOp(weyl, weyl.one, 0), 0, [], forms.multiply)

    def test_odd_derivative_has_order_one(self, line):
        weyl = WeylClifford(line)
        op = DiffOp(weyl, weyl.odd_derivative(0), 1)
        probes = monomial_probes(line, 1)
        assert diffop_order_test(op, 1, probes, line.multiply, degree=-1)
        assert not diffop_order_test(op, 0, probes, line.multiply, degree=-1)


class TestSymbols:
    """Test principal symbols and their bracket."""

    def test_symbol_of_a_vector_field(self, forms, weyl):
        sym = symbol_algebra(weyl)
        field = weyl.vector_field({0: mono(forms.variable(1))})
        s = symbol(DiffOp(weyl, field, 1), 1)
        assert sym.format_key(next(iter(s))) == "x2*p_x1"
        assert quantize(weyl, s) == field
        assert symbol_order(s) == 1

    def test_symbol_of_too_high_an_order(self, weyl):
        d2 = weyl.compose(weyl.even_derivative(0), weyl.even_derivative(0))
        with pytest.raises(ContractViolation):
            symbol(DiffOp(weyl, d2, 2), 1)

    def test_poisson_bracket(self, forms, weyl):
        p_x = symbol(DiffOp(weyl, weyl.even_derivative(0), 1), 1)
        times_x = weyl.multiplication(mono(forms.variable(0)))
        x = symbol(DiffOp(weyl, times_x, 0), 0)
        bracket = poisson_bracket_symbols(weyl, p_x, 1, x, 0)
        assert bracket == symbol_algebra(weyl).one

    def test_epsilon_k(self, forms, weyl):
        d2 = weyl.compose(weyl.even_derivative(0), weyl.even_derivative(0))
        s = symbol(DiffOp(weyl, d2, 2), 2)
        x = mono(forms.variable(0))
        assert epsilon_k(weyl, s, [x, x]) == forms.one * 2


class TestPresentation:
    """Test the Lie-Rinehart presentation of Der on F1."""

    def test_axioms(self, f1, pres):
        report = pres.verify(monomial_probes(f1.forms, 1))
        assert report.passed
        assert "Der.delta_subordinate" in {r.check_id for r in report.checks}

    def test_curvature_bracket(self, pres):
        bracket = pres.bracket(pres.generator(ETA1), pres.generator(ETA2))
        assert bracket == -pres.generator(ZETA)

    def test_anchor(self, f1, pres):
        u2 = mono(f1.forms.variable(2))
        x = mono(f1.forms.variable(0))
        assert pres.anchor(pres.generator(ETA1), x) == u2
        with pytest.raises(ContractViolation):
            pres.anchor(pres.embed(u2), x)

    def test_delta_of_theta(self, pres):
        assert pres.delta(pres.generator(THETA)) == pres.generator(ZETA)


class TestNormalOrder:
    """Test rewriting to normal order in the envelope."""

    def test_moves_forms_left(self, f1, pres):
        x = f1.forms.variable(0)
        value = envelope_normal_form([ZETA, x], pres)
        unit = mono(pres.key(f1.forms.unit_key, ()))
        assert value == mono(pres.key(x, (ZETA,))) + unit

    def test_sorts_generators(self, pres):
        value = envelope_normal_form([ETA2, ETA1], pres)
        ordered = mono(pres.key(pres.base.unit_key, (ETA1, ETA2)))
        assert value == ordered + pres.generator(ZETA)
        sym = pres.symmetric_algebra()
        expected = sym.multiply(sym.generator(ETA1), sym.generator(ETA2))
        assert gr_projection(pres, value, 2) == expected
        with pytest.raises(ContractViolation):
            gr_projection(pres, value, 1)

    def test_odd_generator_squares_to_zero(self, pres):
        assert not envelope_normal_form([THETA, THETA], pres)

    def test_strategies_agree(self, f1, pres):
        x, dx = f1.forms.variable(0), f1.forms.dx(0)
        words = [(ETA2, ETA1, ZETA), (THETA, dx, ETA1), (ETA2, x, ETA1, THETA)]
        assert confluence_witness(pres, words) is None

    def test_augmentation(self, f1, pres):
        value = envelope_normal_form([ZETA, f1.forms.variable(0)], pres)
        assert augmentation(pres, value) == f1.forms.one

    def test_bad_input(self, pres):
        with pytest.raises(ContractViolation):
            envelope_normal_form([ZETA], pres, strategy="random")
        with pytest.raises(ContractViolation):
            envelope_normal_form([17], pres)

    def test_guard(self, pres):
        with pytest.raises(NonTerminationError):
            envelope_normal_form([ETA2, ETA1, ZETA, THETA], pres, guard=1)


class TestEnvelope:
    """Test products, the differential and the map to operators."""

    def test_operator_morphism(self, f1, pres):
        a, b = pres.generator(ETA2), pres.generator(ETA1)
        product = envelope_product(pres, a, b)
        expected = f1.weyl.compose(f1.J(1), f1.J(0))
        assert envelope_to_operators(pres, product) == expected

    def test_swap_fault_breaks_the_morphism(self, f1, pres):
        a, b = pres.generator(ETA2), pres.generator(ETA1)
        expected = f1.weyl.compose(f1.J(1), f1.J(0))
        with faults.inject_fault("envelope.swap"):
            product = envelope_product(pres, a, b)
        assert envelope_to_operators(pres, product) != expected

    def test_differential(self, pres):
        theta = pres.generator(THETA)
        assert envelope_differential(pres, theta) == pres.generator(ZETA)
        for index in (THETA, ETA1):
            once = envelope_differential(pres, pres.generator(index))
            assert not envelope_differential(pres, once)

    def test_report(self, f1, pres):
        elements = [pres.generator(i) for i in range(pres.size)]
        elements.append(pres.embed(mono(f1.forms.variable(0))))
        samples = [(a, b) for a in elements for b in elements]
        words = [(ETA2, ETA1, THETA), (ZETA, f1.forms.variable(0))]
        records = envelope_report(pres, samples, words)
        assert [r.check_id for r in records] == [
            "Der.confluence",
            "Der.operator_morphism",
            "Der.gr_commutative",
        ]
        assert all(r.passed for r in records)
