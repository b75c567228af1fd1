"""
Tests for operation families and the residuals of their defining identities.

A DG algebra of polynomial forms serves as an A-infinity example and the
graded commutator of coordinate operators as an L-infinity example.
"""

import itertools

import pytest

from shtransfer.core.kernel import GradedElement
from shtransfer.core.structures import (
    OperationFamily,
    counts,
    degree_residual,
    dg_algebra_family,
    direct_sum_family,
    first_nonzero_residual,
    linfty_residual,
    module_residual,
    multilinearity_residual,
    poisson_multiderivation_residual,
    skew_symmetrize,
    skew_symmetry_residual,
    stasheff_residual,
    structure_table,
)
from shtransfer.exceptions import CapacityError, ContractViolation

pytestmark = pytest.mark.unit

mono = GradedElement.monomial


@pytest.fixture
def form_family(forms):
    return dg_algebra_family(
        forms.differential, forms.product, arity_cap=4, name="forms"
    )


@pytest.fixture
def commutator_family(weyl):
    return dg_algebra_family(
        lambda key: GradedElement(), weyl.commutator_keys, 3, "linfty", "commutator"
    )


@pytest.fixture
def form_inputs(forms):
    keys = [
        forms.unit_key,
        forms.variable(0),
        forms.dx(0),
        forms.dx(1),
        forms.variable(2),
    ]
    return [mono(key) for key in keys]


@pytest.fixture
def operator_inputs(forms, weyl):
    return [
        weyl.multiplication(mono(forms.variable(0))),
        weyl.even_derivative(0),
        weyl.multiplication(mono(forms.dx(0))),
        weyl.odd_derivative(0),
        weyl.odd_derivative(1),
    ]


class TestOperationFamily:
    """Test lazy evaluation and bookkeeping."""

    def test_missing_arity_is_zero(self, form_family, form_inputs):
        assert not form_family(3, *form_inputs[:3])

    def test_capacity(self, form_family, forms):
        with pytest.raises(CapacityError):
            form_family.evaluate(5, [forms.unit_key] * 5)

    def test_arity_mismatch(self, form_family, forms):
        with pytest.raises(ContractViolation):
            form_family.evaluate(2, [forms.unit_key])

    def test_unknown_flavor(self):
        with pytest.raises(ContractViolation):
            OperationFamily("pre_lie", 2, {})

    def test_memo_counts(self, form_family, forms):
        keys = [forms.variable(0), forms.dx(0)]
        form_family.evaluate(2, keys)
        form_family.evaluate(2, keys)
        stats = counts(form_family)
        assert stats["hits"] == 1
        assert stats["size"] == 1

    def test_restrict_and_with_op(self, form_family, forms):
        restricted = form_family.restrict(1)
        assert restricted.arity_cap == 1
        replaced = form_family.with_op(2, lambda a, b: GradedElement(), "null")
        assert replaced.name == "null"
        assert not replaced.evaluate(2, [forms.unit_key, forms.unit_key])

    def test_structure_table(self, form_family, forms):
        table = structure_table(form_family, 2, [(forms.dx(0), forms.dx(1))])
        [(inputs, value)] = table
        assert inputs == (forms.dx(0), forms.dx(1))
        assert value == forms.product(forms.dx(0), forms.dx(1))


class TestStasheff:
    """Test the A-infinity identities on a DG algebra."""

    def test_dg_algebra_satisfies_identities(self, form_family, form_inputs):
        for k in (1, 2, 3):
            for inputs in itertools.product(form_inputs, repeat=k):
                assert not stasheff_residual(form_family, k, inputs)

    def test_broken_leibniz_is_detected(self, form_family, forms, form_inputs):
        broken = form_family.with_op(
            1, lambda key: forms.differential(key) * 2 if key.forms else GradedElement()
        )
        found = first_nonzero_residual(
            lambda inputs: stasheff_residual(broken, 2, inputs),
            list(itertools.product(form_inputs, repeat=2)),
        )
        assert found is not None

    def test_degree_and_multilinearity(self, form_family, forms, form_inputs):
        assert not degree_residual(form_family, 2, [forms.dx(0), forms.variable(1)])
        other = mono(forms.variable(1))
        assert not multilinearity_residual(form_family, 2, form_inputs[:2], 0, other, 3)


class TestLInfinity:
    """Test the generalized Jacobi identity on the commutator bracket."""

    def test_commutator_is_skew(self, commutator_family, operator_inputs):
        for a, b in itertools.product(operator_inputs, repeat=2):
            assert not skew_symmetry_residual(commutator_family, 2, [a, b], (2, 1))

    def test_jacobi(self, commutator_family, operator_inputs):
        for inputs in itertools.combinations_with_replacement(operator_inputs, 3):
            assert not linfty_residual(commutator_family, 3, inputs)

    def test_skew_composition_is_the_commutator(self, weyl, operator_inputs):
        composition = dg_algebra_family(
            lambda key: GradedElement(), weyl.compose_keys, 3, "ainfty", "compose"
        )
        skew = skew_symmetrize(composition)
        assert skew.flavor == "linfty"
        for a, b in itertools.product(operator_inputs, repeat=2):
            assert skew(2, a, b) == weyl.commutator(a, b)
        for inputs in itertools.combinations_with_replacement(operator_inputs, 3):
            assert not linfty_residual(skew, 3, inputs)

    def test_only_ainfty_is_skew_symmetrized(self, commutator_family):
        with pytest.raises(ContractViolation):
            skew_symmetrize(commutator_family)


class TestModules:
    """Test module identities through the direct sum."""

    def test_algebra_acting_on_itself(self, forms, form_family, form_inputs):
        module = OperationFamily(
            "ainfty_module", 4, {1: forms.differential, 2: forms.product}, "self"
        )
        for k in (2, 3):
            for inputs in itertools.product(form_inputs[:4], repeat=k):
                assert not module_residual(form_family, module, k, inputs)

    def test_direct_sum_needs_module_flavor(self, form_family):
        with pytest.raises(ContractViolation):
            direct_sum_family(form_family, form_family)


def poisson_family(forms, scale, weighted=True):
    """{x1, x2} = scale on functions of x1, x2, u1, weighted by polynomial degree."""

    def bracket(k1, k2):
        def d(key, var):
            return forms.partial(key, var)

        value = forms.multiply(d(k1, 0), d(k2, 1)) - forms.multiply(d(k1, 1), d(k2, 0))
        return forms.multiply(scale, value)

    return OperationFamily(
        "poisson_linfty",
        2,
        {2: bracket},
        "pi",
        product=forms.multiply,
        weight=(lambda key: sum(key.exps)) if weighted else None,
    )


@pytest.fixture
def functions(forms):
    x1, x2, u1 = (mono(forms.variable(i)) for i in range(3))
    return [forms.one, x1, x2, u1, forms.multiply(x1, u1)]


class TestPoissonMultiderivation:
    """Test the slot Leibniz rule and the weight rule."""

    def test_linear_bracket_is_a_multiderivation(self, forms, functions):
        family = poisson_family(forms, mono(forms.variable(2)))
        for u, a, b in itertools.product(functions, repeat=3):
            for position in (0, 1):
                inputs = [u, functions[2]]
                assert not poisson_multiderivation_residual(
                    family, 2, position, inputs, (a, b)
                )

    def test_unit_is_annihilated(self, forms, functions):
        family = poisson_family(forms, mono(forms.variable(2)))
        for u in functions:
            assert not family(2, u, forms.one)
            assert not poisson_multiderivation_residual(
                family, 2, 1, [u, u], (forms.one, functions[1])
            )

    def test_constant_bracket_breaks_the_weight_rule(self, forms, functions):
        family = poisson_family(forms, forms.one)
        x1, x2 = functions[1], functions[2]
        residual = poisson_multiderivation_residual(
            family, 2, 1, [x1, x2], (forms.one, x2)
        )
        assert residual == forms.one
        unweighted = poisson_family(forms, forms.one, weighted=False)
        assert not poisson_multiderivation_residual(
            unweighted, 2, 1, [x1, x2], (forms.one, x2)
        )

    def test_needs_a_product(self, commutator_family, operator_inputs):
        with pytest.raises(ContractViolation):
            poisson_multiderivation_residual(
                commutator_family, 2, 0, operator_inputs[:2], tuple(operator_inputs[:2])
            )
