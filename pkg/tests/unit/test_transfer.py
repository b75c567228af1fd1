"""
Tests for the transfer engines, module transfer, strict units and filtered
isomorphisms.

The running example contracts the DG algebra of polynomial forms on the
line onto the constants.
"""

import itertools

import pytest
from sympy import QQ

from shtransfer.core import faults
from shtransfer.core.homotopy import Complex, ContractionData, GradedMap
from shtransfer.core.kernel import FormAlgebra, FormKey, GradedElement, PolyContext
from shtransfer.core.structures import (
    linfty_residual,
    module_residual,
    skew_symmetrize,
    stasheff_residual,
)
from shtransfer.core.transfer import (
    AInfinityTransfer,
    DGAlgebraCarrier,
    DGLieCarrier,
    DGModuleCarrier,
    FilteredIsomorphism,
    LInfinityTransfer,
    module_closed_form,
    pbw_perturb_pipeline,
    transfer_ainfty,
    transfer_linfty,
    transfer_module,
    unit_check,
    verify_filtered,
)
from shtransfer.exceptions import CapacityError, ContractViolation
from shtransfer.types import Caps

pytestmark = pytest.mark.unit

mono = GradedElement.monomial


@pytest.fixture
def line():
    return FormAlgebra(PolyContext(1, 0), odd=1)


@pytest.fixture
def poincare(line):
    def p(key):
        return mono(key) if key == line.unit_key else GradedElement()

    def h(key):
        if not key.forms:
            return GradedElement()
        (power,) = key.exps
        return mono(FormKey((power + 1,), ()), QQ(1, power + 1))

    d = GradedMap(1, line.differential, "d")
    big = Complex("forms", lambda caps: line.basis(caps.max_degree), d)
    small = Complex("constants", lambda caps: [line.unit_key], GradedMap.zero(1))
    p_map, h_map = GradedMap(0, p, "p"), GradedMap(-1, h, "h")
    return ContractionData(big, small, p_map, GradedMap.identity("j"), h_map)


@pytest.fixture
def algebra(line, poincare):
    return DGAlgebraCarrier(poincare.big, line.product, line.one, "forms")


@pytest.fixture
def commutator(line, poincare):
    def bracket(a, b):
        sign = (-1) ** (a.degree * b.degree)
        return line.product(a, b) - line.product(b, a) * sign

    return DGLieCarrier(poincare.big, bracket, "forms")


@pytest.fixture
def caps():
    return Caps(max_arity=4, max_degree=2, samples=50)


class TestCarriers:
    """Test the DG carriers' self-checks."""

    def test_algebra_verifies(self, algebra, caps):
        report = algebra.verify(caps)
        assert report.passed
        assert {r.check_id for r in report.checks} == {
            "forms.associative",
            "forms.leibniz",
            "forms.unit",
        }

    def test_wrong_unit_is_caught(self, line, algebra, caps):
        doubled = line.one * 2
        broken = DGAlgebraCarrier(algebra.complex, line.product, doubled, "forms")
        failed = [r.check_id for r in broken.verify(caps).checks if not r.passed]
        assert failed == ["forms.unit"]

    def test_module_verifies(self, line, algebra, caps):
        module = DGModuleCarrier(algebra, algebra.complex, line.product, "self")
        assert module.verify(caps).passed


class TestAInfinityTransfer:
    """Test the tree recursion on the Poincare contraction."""

    def test_product_on_constants(self, line, poincare, algebra, caps):
        family = transfer_ainfty(poincare, algebra, arity_cap=4, caps=caps)
        one = line.one
        assert family(2, one, one) == one
        assert not family(3, one, one, one)

    def test_stasheff_identities(self, line, poincare, algebra):
        family = transfer_ainfty(poincare, algebra, arity_cap=4)
        inputs = [line.one * 3]
        for k in range(1, 5):
            assert not stasheff_residual(family, k, inputs * k)

    def test_capacity(self, line, poincare, algebra):
        engine = AInfinityTransfer(poincare, algebra, arity_cap=2)
        with pytest.raises(CapacityError):
            engine.alpha(3, [line.unit_key] * 3)
        with pytest.raises(ContractViolation):
            engine.alpha(2, [line.unit_key])

    def test_gamma_two_on_forms(self, line, poincare, algebra):
        """gamma_2 applies h to the product of the two inclusions."""
        engine = AInfinityTransfer(poincare, algebra)
        assert not engine.gamma(2, [line.unit_key, line.unit_key])

    def test_sign_exponent_fault(self):
        assert AInfinityTransfer.sign_exponent(1, 2, [1, 0, 0]) == 1
        with faults.inject_fault("transfer.a_sign"):
            assert AInfinityTransfer.sign_exponent(1, 2, [1, 0, 0]) == 2

    def test_audit(self, line, poincare, algebra):
        engine = AInfinityTransfer(poincare, algebra, arity_cap=3)
        engine.alpha(3, [line.unit_key] * 3)
        record = engine.audit(5, seed=1)
        assert record.passed
        assert record.check_id == "alpha.memo_audit"
        assert record.details["audits"] > 0

    def test_refuses_broken_contraction(self, line, poincare, algebra, caps):
        broken = ContractionData(
            poincare.big, poincare.small, poincare.p, poincare.j, poincare.h.scale(3)
        )
        with pytest.raises(ContractViolation):
            transfer_ainfty(broken, algebra, caps=caps)


class TestLInfinityTransfer:
    """Test the unshuffle recursion on the Poincare contraction."""

    def test_abelian_bracket_transfers_to_zero(self, line, poincare, caps):
        zero = DGLieCarrier(poincare.big, lambda a, b: GradedElement(), "abelian")
        family = transfer_linfty(poincare, zero, arity_cap=4, caps=caps)
        one = line.one
        assert not family(1, one)
        for k in range(2, 5):
            assert not family(k, *[one] * k)
            assert not linfty_residual(family, k, [one] * k)

    def test_commutator_bracket_verifies(self, commutator, caps):
        assert commutator.verify(caps).passed

    @pytest.mark.parametrize("standard", [False, True])
    def test_skew_symmetrized_ainfty_agrees(
        self, line, poincare, algebra, commutator, standard
    ):
        alpha = skew_symmetrize(transfer_ainfty(poincare, algebra, arity_cap=3))
        lam = transfer_linfty(poincare, commutator, arity_cap=3, standard=standard)
        inputs = [line.one, line.one * 2, line.one * 3]
        for k in range(1, 4):
            assert alpha(k, *inputs[:k]) == lam(k, *inputs[:k])
            assert not linfty_residual(lam, k, inputs[:k])

    def test_standard_normalization_halves_phi(self, line, poincare, commutator):
        unscaled = LInfinityTransfer(poincare, commutator, arity_cap=2)
        standard = LInfinityTransfer(poincare, commutator, arity_cap=2, standard=True)
        keys = [line.unit_key, line.unit_key]
        assert standard.phi(2, keys) * 2 == unscaled.phi(2, keys)
        assert standard.lam(1, keys[:1]) == unscaled.lam(1, keys[:1])

    def test_capacity(self, line, poincare, commutator):
        engine = LInfinityTransfer(poincare, commutator, arity_cap=2)
        with pytest.raises(CapacityError):
            engine.lam(3, [line.unit_key] * 3)
        with pytest.raises(ContractViolation):
            engine.phi(2, [line.unit_key])

    def test_audit(self, line, poincare, commutator):
        engine = LInfinityTransfer(poincare, commutator, arity_cap=3)
        engine.lam(3, [line.unit_key] * 3)
        assert engine.audit(5, seed=2).passed


class TestModuleTransfer:
    """Test the transferred action of the constants on forms."""

    def test_module_identities(self, line, poincare, algebra, caps):
        module = DGModuleCarrier(algebra, algebra.complex, line.product, "self")
        mu = transfer_module(poincare, module, arity_cap=4, caps=caps)
        alpha = AInfinityTransfer(poincare, algebra, arity_cap=4).family()
        a = [line.one, line.one * 2]
        m = [mono(key) for key in line.basis(2)]
        for k in (2, 3):
            for algebra_inputs in itertools.product(a, repeat=k - 1):
                for form in m:
                    inputs = list(algebra_inputs) + [form]
                    assert not module_residual(alpha, mu, k, inputs)

    def test_closed_form(self, line, poincare, algebra):
        module = DGModuleCarrier(algebra, algebra.complex, line.product, "self")
        mu = transfer_module(poincare, module, arity_cap=3)
        engine = AInfinityTransfer(poincare, algebra, arity_cap=3)
        for form in line.basis(2):
            for k in (2, 3):
                keys = [line.unit_key] * (k - 1) + [form]
                expected = module_closed_form(engine, module, keys)
                assert mu.evaluate(k, keys) == expected

    def test_closed_form_needs_algebra_argument(self, line, poincare, algebra):
        module = DGModuleCarrier(algebra, algebra.complex, line.product, "self")
        engine = AInfinityTransfer(poincare, algebra)
        with pytest.raises(ContractViolation):
            module_closed_form(engine, module, [line.unit_key])


class TestUnits:
    """Test strict unitality."""

    def test_unit_is_strict(self, line, poincare, algebra, caps):
        family = AInfinityTransfer(poincare, algebra, arity_cap=3).family()
        record = unit_check(family, poincare, line.one, caps)
        assert record.passed
        assert record.details["asserted"] is True

    def test_not_asserted_when_unit_is_lost(self, line, poincare, algebra, caps):
        lost = ContractionData(
            poincare.big, poincare.small, GradedMap.zero(0), poincare.j, poincare.h
        )
        family = AInfinityTransfer(lost, algebra, arity_cap=2).family()
        record = unit_check(family, lost, line.one, caps)
        assert record.passed
        assert record.details["asserted"] is False


class TestFilteredIsomorphism:
    """Test the filtration and inversion checks."""

    @staticmethod
    def level(key):
        return sum(key.exps)

    def test_identity_passes(self, line):
        ident = GradedMap.identity()
        iso = FilteredIsomorphism(ident, ident, self.level, "id")
        record = verify_filtered(iso, line.basis(2), mono)
        assert record.passed
        assert record.check_id == "id.filtered"

    def test_raising_the_level_fails(self, line):
        def up(key):
            return mono(key) + mono(FormKey((key.exps[0] + 1,), key.forms))

        forward = GradedMap(0, up)
        iso = FilteredIsomorphism(forward, GradedMap.identity(), self.level, "up")
        record = verify_filtered(iso, line.basis(1), mono)
        assert not record.passed
        assert "lower order" in record.witness

    def test_wrong_inverse_fails(self, line):
        def down(key):
            if not key.exps[0]:
                return mono(key)
            return mono(key) + mono(FormKey((key.exps[0] - 1,), key.forms))

        forward = GradedMap(0, down)
        iso = FilteredIsomorphism(forward, GradedMap.identity(), self.level, "down")
        record = verify_filtered(iso, line.basis(1), mono)
        assert not record.passed
        assert "inverse" in record.witness


class TestPerturbedPipeline:
    """Test the guards of the transport-perturb-transfer pipeline."""

    @staticmethod
    def plane():
        plane = FormAlgebra(PolyContext(2, 0), odd=2)
        d = GradedMap(1, plane.differential, "d")
        big = Complex(
            "plane",
            lambda caps: plane.basis(caps.max_degree),
            d,
            lambda key: -sum(key.exps),
        )
        ident = GradedMap.identity()
        c = ContractionData(big, big, ident, ident, GradedMap.zero(-1))
        iso = FilteredIsomorphism(ident, ident, lambda key: -sum(key.exps), "id")
        return plane, d, c, iso

    def test_rejects_a_transported_differential_that_is_not_square_zero(self):
        plane, d, c, iso = self.plane()
        twist = mono(FormKey((0, 1), (0,)))
        e = GradedMap(1, lambda key: plane.multiply(twist, mono(key)), "e")
        with pytest.raises(ContractViolation, match="square-zero"):
            pbw_perturb_pipeline(c, iso, d + e, plane.product, 2, Caps(max_degree=2))

    def test_rejects_a_perturbation_that_keeps_the_filtration(self):
        plane, d, c, iso = self.plane()
        with pytest.raises(ContractViolation, match="filtration"):
            pbw_perturb_pipeline(
                c, iso, d.scale(2), plane.product, 2, Caps(max_degree=2)
            )
