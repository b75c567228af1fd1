"""
Tests for PBW, the order-(-1) part of composition, the leading components
and the closed forms on the curved foliation F1.
"""

import pytest
from sympy import QQ

from shtransfer.core.foliation import eta, theta, zeta
from shtransfer.core.kernel import FormKey, GradedElement
from shtransfer.core.pipeline import (
    circledast,
    circledast_by_composition,
    circledast_strata,
    closed_form_alphas,
    derived_alpha3_coefficient,
    displayed_alpha3_coefficient,
    enveloping_sh_identity,
    foliation_lr_structure,
    order_components,
    projection_component,
    skew_bracket_residual,
    stratum,
    weight_of,
)
from shtransfer.core.structures import LRStructure, linfty_residual, lr_residual
from shtransfer.core.transfer import LInfinityTransfer, verify_filtered
from shtransfer.exceptions import ContractViolation

pytestmark = pytest.mark.unit

mono = GradedElement.monomial


@pytest.fixture(scope="module")
def pbw(f1_pipeline):
    return f1_pipeline.pbw


@pytest.fixture(scope="module")
def S(f1_pipeline):
    return f1_pipeline.S


def eta_key(F, S, a):
    return S.gen_key(eta(F, a))


def form_key(S, form):
    return S.key(form, S.zero_exps)


class TestPBW:
    """Test PBW, its inverse and the projection."""

    def test_transverse_letter(self, f1, pbw, S):
        assert pbw.forward.on_key(eta_key(f1, S, 0)) == f1.J(0)
        assert pbw.inverse(f1.J(0)) == S.generator(eta(f1, 0))

    def test_filtered_isomorphism(self, pbw, S):
        keys = S.basis(2, 1)
        weyl = pbw.weyl

        def leading(key):
            return weyl.order_part(pbw.forward.on_key(key), key.weight)

        assert verify_filtered(pbw.iso, keys, leading).passed

    def test_underline_is_the_identity(self, f1, pbw, S):
        for key in S.basis(2, 1, bar_only=True):
            assert pbw.underline(mono(key)) == mono(key)

    def test_underline_needs_normal_operators(self, f1, pbw, S):
        with pytest.raises(ContractViolation):
            pbw.underline(S.generator(theta(f1, 0)))

    def test_projection_has_no_order_minus_one_part(self, pbw, S):
        for key in S.basis(2, 1, exact_weight=2):
            assert not projection_component(pbw, mono(key), -1)


class TestCircledast:
    """Test the order-(-1) part of composition."""

    def test_curvature_term(self, f1, pbw, S):
        value = circledast(pbw, S.generator(eta(f1, 0)), S.generator(eta(f1, 1)))
        assert value == S.generator(zeta(f1, 0)) * QQ(-1, 2)

    def test_transport_term(self, f1, pbw, S):
        u2 = mono(form_key(S, f1.forms.variable(2)))
        assert circledast(pbw, S.generator(eta(f1, 1)), u2) == S.one
        assert not circledast(pbw, u2, S.generator(eta(f1, 1)))

    def test_contraction_term(self, f1, pbw, S):
        dx = mono(form_key(S, f1.forms.dx(0)))
        assert circledast(pbw, S.generator(theta(f1, 0)), dx) == S.one

    def test_matches_composition(self, f1, pbw, S):
        pool = [key for key in S.basis(2, 1) if not any(key.exps[f1.n : 2 * f1.n])]
        for k1 in pool[::7]:
            for k2 in pool[::5]:
                a, b = mono(k1), mono(k2)
                assert circledast(pbw, a, b) == circledast_by_composition(pbw, a, b)

    def test_lands_in_the_strata(self, f1, pbw, S):
        n = f1.n
        pool = [key for key in S.basis(2, 1) if not any(key.exps[n : 2 * n])]
        for k1 in pool[::6]:
            for k2 in pool[::4]:
                (r, _, l), (s, _, m) = stratum(k1, n), stratum(k2, n)
                allowed = circledast_strata(r, s, l, m)
                for key in circledast(pbw, mono(k1), mono(k2)):
                    assert stratum(key, n) in allowed

    def test_rejects_leaf_derivatives(self, f1, pbw, S):
        with pytest.raises(ContractViolation):
            circledast(pbw, S.generator(zeta(f1, 0)), S.one)

    def test_strata(self):
        expected = [(1, 1, 1), (2, 0, 1), (1, 0, 2), (0, 0, 3)]
        assert circledast_strata(1, 0, 2, 1) == expected


class TestOrderComponents:
    def test_weight_of(self, f1, S):
        assert weight_of(S.generator(eta(f1, 0))) == 1
        assert weight_of(GradedElement()) is None
        with pytest.raises(ContractViolation):
            weight_of(S.one + S.generator(eta(f1, 0)))

    def test_zero_input_has_no_components(self, f1_pipeline, S):
        family = f1_pipeline.family
        inputs = [S.one, GradedElement()]
        value = order_components(lambda *xs: family(2, *xs), inputs, 0)
        assert not value


class TestLeadingComponents:
    """Test the leading recursion and the closed forms on F1."""

    def test_alpha2_next(self, f1, f1_pipeline, S):
        eta2 = S.gen_key(eta(f1, 1))
        u2 = form_key(S, f1.forms.variable(2))
        assert f1_pipeline.leading.alpha(2, (eta2, u2)) == S.one
        closed = closed_form_alphas(f1_pipeline.pbw, 2, [mono(eta2), mono(u2)])
        assert closed[-1] == S.one
        assert closed[0] == S.multiply(mono(eta2), mono(u2))

    def test_alpha3_curvature(self, f1, f1_pipeline, S):
        dx = form_key(S, f1.forms.dx(0))
        keys = (S.gen_key(eta(f1, 0)), S.gen_key(eta(f1, 1)), dx)
        inputs = [mono(key) for key in keys]
        closed = closed_form_alphas(f1_pipeline.pbw, 3, inputs)[-2]
        assert closed == S.one * QQ(-1, 2)
        family = f1_pipeline.family
        transferred = order_components(lambda *xs: family(3, *xs), inputs, -2)
        assert transferred == closed
        assert f1_pipeline.leading.alpha(3, keys) == closed

    def test_alpha3_needs_a_form_to_contract(self, f1, f1_pipeline, S):
        keys = (S.gen_key(eta(f1, 0)), S.gen_key(eta(f1, 1)), S.unit_key)
        assert not f1_pipeline.leading.alpha(3, keys)

    def test_leading_rejects_leaf_letters(self, f1, f1_pipeline, S):
        with pytest.raises(ContractViolation):
            f1_pipeline.leading.epsilon(1, (S.gen_key(theta(f1, 0)),))
        with pytest.raises(ContractViolation):
            f1_pipeline.leading.alpha(1, (S.unit_key,))

    def test_no_closed_form_beyond_arity_three(self, f1_pipeline, S):
        with pytest.raises(ContractViolation):
            closed_form_alphas(f1_pipeline.pbw, 4, [S.one] * 4)

    def test_coefficients(self):
        assert displayed_alpha3_coefficient(1) == 1
        assert displayed_alpha3_coefficient(3) == QQ(3, 2)
        assert derived_alpha3_coefficient(1, 1) == QQ(1, 2)
        assert derived_alpha3_coefficient(2, 3) == 3


class TestFlatFoliation:
    """Without curvature the structure stops at arity two."""

    def test_higher_operations_vanish(self, flat, flat_pipeline):
        S = flat_pipeline.S
        e = S.gen_key(eta(flat, 0))
        dx = form_key(S, flat.forms.dx(0))
        family = flat_pipeline.family
        for keys in [(e, e, dx), (e, dx, e), (dx, e, e), (e, e, e)]:
            assert not family(3, *[mono(key) for key in keys])
        assert not family(4, *[mono(key) for key in (e, e, e, dx)])

    def test_unit(self, flat_pipeline):
        S = flat_pipeline.S
        e = S.generator(2)
        assert flat_pipeline.family(2, S.one, e) == e
        assert flat_pipeline.family(2, e, S.one) == e


@pytest.fixture(scope="module")
def lr(f1, S):
    return foliation_lr_structure(f1, 4, S)


@pytest.fixture(scope="module")
def curved_sections(f1, S):
    """x1 u1 eta1, u2 eta1 and u1 eta2: brackets of these reach arity three."""
    return [
        mono(S.gen_key(eta(f1, 0), FormKey((1, 1, 0), ()))),
        mono(S.gen_key(eta(f1, 0), FormKey((0, 0, 1), ()))),
        mono(S.gen_key(eta(f1, 1), FormKey((0, 1, 0), ()))),
    ]


class TestFoliationLR:
    """The LR-infinity structure of leafwise forms with values in X-bar."""

    def test_jacobi_arity_three(self, lr, curved_sections):
        for k in (2, 3):
            assert not linfty_residual(lr.structure.brackets, k, curved_sections[:k])
        assert not linfty_residual(lr.structure.brackets, 3, curved_sections[::-1])

    @pytest.mark.slow
    def test_jacobi_arity_four(self, lr, curved_sections):
        inputs = curved_sections + curved_sections[1:2]
        assert not linfty_residual(lr.structure.brackets, 4, inputs)

    def test_symmetric_tree_normalization(self, lr, curved_sections):
        unscaled = LInfinityTransfer(lr.contraction, lr.lie, 3)
        keys = [next(iter(q)) for q in curved_sections]
        assert lr.engine.lam(2, keys[:2]) * 2 == unscaled.lam(2, keys[:2])
        assert lr.engine.lam(3, keys) * 4 == unscaled.lam(3, keys)
        assert lr.engine.psi(3, keys) * 4 == unscaled.psi(3, keys)

    def test_leibniz_rule(self, f1, lr, curved_sections):
        x1 = mono(f1.forms.variable(0))
        u1 = mono(f1.forms.variable(1))
        for a in (x1, u1):
            for k in (1, 2, 3):
                assert not lr_residual(lr.structure, k, curved_sections[:k], a)

    def test_anchor_derivation_and_linearity(self, f1, lr, curved_sections):
        x1 = mono(f1.forms.variable(0))
        u2 = mono(f1.forms.variable(2))
        for k in (2, 3):
            fields = curved_sections[: k - 1]
            assert not lr_residual(lr.structure, k, fields, x1, "derivation", u2)
            assert not lr_residual(lr.structure, k, fields, u2, "linearity", x1)

    def test_doubled_anchor_breaks_leibniz(self, f1, lr, curved_sections):
        anchors = lr.structure.anchors
        doubled = anchors.with_op(2, lambda *keys: anchors.ops[2](*keys) * 2, "2nu")
        broken = LRStructure(
            lr.structure.brackets,
            doubled,
            lr.structure.algebra_product,
            lr.structure.module_product,
        )
        x1 = mono(f1.forms.variable(0))
        fields = curved_sections[:2]
        assert not lr_residual(lr.structure, 2, fields, x1)
        assert lr_residual(broken, 2, fields, x1)

    def test_lr_rejects_wrong_arity(self, f1, lr, curved_sections):
        x1 = mono(f1.forms.variable(0))
        with pytest.raises(ContractViolation):
            lr_residual(lr.structure, 3, curved_sections[:2], x1)
        with pytest.raises(ContractViolation):
            lr_residual(lr.structure, 2, curved_sections[:1], x1, "derivation")


class TestEnvelopingIdentities:
    """Skew-symmetrizations of the transferred structure on F1."""

    def test_brackets_are_skew_symmetrizations(self, f1_pipeline, lr, curved_sections):
        for k in (1, 2, 3):
            assert not skew_bracket_residual(f1_pipeline, lr, k, curved_sections[:k])

    def test_anchors_are_skew_symmetrizations(
        self, f1, f1_pipeline, lr, curved_sections
    ):
        x1 = mono(f1.forms.variable(0))
        for k in (1, 2, 3):
            fields = curved_sections[: k - 1]
            assert not enveloping_sh_identity(f1_pipeline, lr, k, fields, x1)

    def test_enveloping_arity_mismatch(self, f1, f1_pipeline, lr, curved_sections):
        x1 = mono(f1.forms.variable(0))
        with pytest.raises(ContractViolation):
            enveloping_sh_identity(f1_pipeline, lr, 2, curved_sections[:2], x1)
