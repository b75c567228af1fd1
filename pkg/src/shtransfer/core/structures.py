"""
Strong-homotopy structures and their residual checkers.

An ``OperationFamily`` is a table of multilinear operations indexed by arity,
evaluated lazily on basis keys and extended multilinearly. Each residual
function evaluates the left side of one defining identity; a structure is
valid on a tuple of inputs exactly when the residual is zero.
"""

from __future__ import annotations

import itertools
import logging
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
)

from ..exceptions import CapacityError, ContractViolation
from ..utils.helpers import MemoTable
from .kernel import GradedElement, koszul_sign, multilinear, parity_sign, unshuffles

logger = logging.getLogger(__name__)

FLAVORS = (
    "ainfty",
    "linfty",
    "ainfty_module",
    "linfty_module",
    "lr_infty",
    "poisson_linfty",
)

KeyOperation = Callable[..., GradedElement]
Product = Callable[[GradedElement, GradedElement], GradedElement]


class OperationFamily:
    """
    Multilinear operations of degree 2 - k for arities 1..arity_cap.

    Arities missing from ``ops`` are the zero operation. Module flavors take
    the module argument in the last slot.
    """

    def __init__(
        self,
        flavor: str,
        arity_cap: int,
        ops: Mapping[int, KeyOperation],
        name: str = "family",
        product: Optional[Product] = None,
        weight: Optional[Callable[[Hashable], int]] = None,
        engine: Optional[object] = None,
    ):
        if flavor not in FLAVORS:
            raise ContractViolation(f"unknown flavor {flavor!r}")
        if arity_cap < 1:
            raise ContractViolation("arity cap must be at least 1")
        self.flavor = flavor
        self.arity_cap = arity_cap
        self.ops = dict(ops)
        self.name = name
        self.product = product
        self.weight = weight
        self.engine = engine  # the transfer engine that produced the family
        self._memo = MemoTable(name=f"{name}.ops")

    def evaluate(self, k: int, keys: Sequence[Hashable]) -> GradedElement:
        """Value of the k-ary operation on basis keys."""
        if k > self.arity_cap:
            raise CapacityError(
                f"arity {k} exceeds the cap {self.arity_cap} of {self.name}"
            )
        if len(keys) != k:
            raise ContractViolation(f"operation of arity {k} given {len(keys)} inputs")
        op = self.ops.get(k)
        if op is None:
            return GradedElement()
        keys = tuple(keys)
        return self._memo.fetch((k, keys), lambda: op(*keys))

    def __call__(self, k: int, *elements: GradedElement) -> GradedElement:
        return multilinear(lambda *keys: self.evaluate(k, keys), elements)

    def restrict(self, arity_cap: int) -> "OperationFamily":
        ops = {k: op for k, op in self.ops.items() if k <= arity_cap}
        return OperationFamily(
            self.flavor, arity_cap, ops, self.name, self.product, self.weight
        )

    def with_op(
        self, k: int, op: KeyOperation, name: Optional[str] = None
    ) -> "OperationFamily":
        """A copy with the k-ary operation replaced."""
        ops = dict(self.ops)
        ops[k] = op
        return OperationFamily(
            self.flavor, self.arity_cap, ops, name or self.name, self.product, self.weight
        )

    def __repr__(self) -> str:
        return f"OperationFamily({self.name}, {self.flavor}, arity<={self.arity_cap})"


def _degrees(inputs: Sequence[GradedElement]) -> Optional[List[int]]:
    degrees = []
    for element in inputs:
        degree = element.degree
        if degree is None:
            return None
        degrees.append(degree)
    return degrees


def _check_arity(
    family: OperationFamily, k: int, inputs: Sequence[GradedElement]
) -> None:
    if k > family.arity_cap:
        raise CapacityError(f"arity {k} exceeds the cap {family.arity_cap}")
    if len(inputs) != k:
        raise ContractViolation(f"identity of arity {k} given {len(inputs)} inputs")


def stasheff_residual(
    family: OperationFamily, k: int, inputs: Sequence[GradedElement]
) -> GradedElement:
    """
    Left side of the A-infinity identity of arity k.

    sum_{i+j=k} (-1)^(ij) sum_l (-1)^(l(i+1) + i(x_1+...+x_l))
        alpha_{j+1}(x_1..x_l, alpha_i(x_{l+1}..x_{l+i}), x_{l+i+1}..x_k)
    """
    _check_arity(family, k, inputs)
    degrees = _degrees(inputs)
    if degrees is None:
        return GradedElement()
    terms = []
    for i in range(1, k + 1):
        j = k - i
        for l in range(j + 1):
            inner = family(i, *inputs[l : l + i])
            if not inner:
                continue
            sign = parity_sign(i * j + l * (i + 1) + i * sum(degrees[:l]))
            outer = family(j + 1, *inputs[:l], inner, *inputs[l + i :])
            terms.append(outer * sign)
    return GradedElement.sum(terms)


def _splits(i: int, j: int) -> List[Tuple[int, ...]]:
    if j == 0:
        return [tuple(range(1, i + 1))]
    return unshuffles(i, j)


def linfty_residual(
    family: OperationFamily, k: int, inputs: Sequence[GradedElement]
) -> GradedElement:
    """
    Left side of the generalized Jacobi identity of arity k.

    sum_{i+j=k} (-1)^(ij) sum_{sigma in S(i,j)} chi(sigma, v)
        lambda_{j+1}(lambda_i(v_sigma(1)..v_sigma(i)), v_sigma(i+1)..v_sigma(k))
    """
    _check_arity(family, k, inputs)
    degrees = _degrees(inputs)
    if degrees is None:
        return GradedElement()
    terms = []
    for i in range(1, k + 1):
        j = k - i
        for sigma in _splits(i, j):
            picked = [inputs[s - 1] for s in sigma]
            inner = family(i, *picked[:i])
            if not inner:
                continue
            sign = parity_sign(i * j) * koszul_sign(sigma, degrees)
            terms.append(family(j + 1, inner, *picked[i:]) * sign)
    return GradedElement.sum(terms)


def skew_symmetry_residual(
    family: OperationFamily,
    k: int,
    inputs: Sequence[GradedElement],
    sigma: Sequence[int],
) -> GradedElement:
    """lambda_k(v_sigma) - chi(sigma, v) lambda_k(v)."""
    degrees = _degrees(inputs)
    if degrees is None:
        return GradedElement()
    permuted = [inputs[s - 1] for s in sigma]
    return family(k, *permuted) - family(k, *inputs) * koszul_sign(sigma, degrees)


def degree_residual(
    family: OperationFamily, k: int, keys: Sequence[Hashable]
) -> GradedElement:
    """The part of an output whose degree differs from 2 - k + sum of inputs."""
    expected = 2 - k + sum(key.degree for key in keys)  # type: ignore[attr-defined]
    return family.evaluate(k, keys).filter(lambda key: key.degree != expected)


def multilinearity_residual(
    family: OperationFamily,
    k: int,
    inputs: Sequence[GradedElement],
    slot: int,
    other: GradedElement,
    scalar: int,
) -> GradedElement:
    """F(.., x + c y, ..) - F(.., x, ..) - c F(.., y, ..) in the given slot."""
    combined = list(inputs)
    combined[slot] = inputs[slot] + other * scalar
    replaced = list(inputs)
    replaced[slot] = other
    return family(k, *combined) - family(k, *inputs) - family(k, *replaced) * scalar


# ---------------------------------------------------------------------------
# Direct sums: modules as structures on A + M
# ---------------------------------------------------------------------------


class SumKey(NamedTuple):
    """Basis key of the tagged direct sum; ``tag`` is "A" or "M"."""

    tag: str
    key: Hashable

    @property
    def degree(self) -> int:
        return self.key.degree  # type: ignore[attr-defined, no-any-return]


def tag(element: GradedElement, label: str) -> GradedElement:
    return GradedElement({SumKey(label, k): c for k, c in element.items()})


def untag(element: GradedElement, label: str) -> GradedElement:
    return GradedElement({k.key: c for k, c in element.items() if k.tag == label})


def direct_sum_family(
    algebra: OperationFamily, module: OperationFamily, name: str = "sum"
) -> OperationFamily:
    """
    Extend an algebra and a module family to A + M.

    For A-infinity modules the result is zero unless only the last entry
    is from M. For L-infinity modules the M entry may sit in any slot and is
    moved last with its Koszul sign; more than one M entry gives zero.
    """
    if module.flavor not in ("ainfty_module", "linfty_module"):
        raise ContractViolation(f"{module.name} is not a module family")
    skew = module.flavor == "linfty_module"
    cap = min(algebra.arity_cap, module.arity_cap)

    def make(k: int) -> KeyOperation:
        def op(*keys: SumKey) -> GradedElement:
            positions = [p for p, key in enumerate(keys) if key.tag == "M"]
            if not positions:
                return tag(algebra.evaluate(k, [key.key for key in keys]), "A")
            if len(positions) > 1:
                return GradedElement()
            p = positions[0]
            if p == k - 1:
                return tag(module.evaluate(k, [key.key for key in keys]), "M")
            if not skew:
                return GradedElement()
            sigma = tuple(s + 1 for s in range(k) if s != p) + (p + 1,)
            sign = koszul_sign(sigma, [key.degree for key in keys])
            moved = [keys[s - 1].key for s in sigma]
            return tag(module.evaluate(k, moved), "M") * sign

        return op

    flavor = "linfty" if skew else "ainfty"
    return OperationFamily(flavor, cap, {k: make(k) for k in range(1, cap + 1)}, name)


def module_residual(
    algebra: OperationFamily,
    module: OperationFamily,
    k: int,
    inputs: Sequence[GradedElement],
) -> GradedElement:
    """
    Residual of the module identity on (a_1, ..., a_{k-1} | m).

    The identity is the A-infinity (or L-infinity) identity of the direct sum
    family evaluated with the module element in the last slot.
    """
    if len(inputs) != k:
        raise ContractViolation(
            f"module identity of arity {k} given {len(inputs)} inputs"
        )
    total = direct_sum_family(algebra, module)
    tagged = [tag(x, "A") for x in inputs[:-1]] + [tag(inputs[-1], "M")]
    if module.flavor == "linfty_module":
        residual = linfty_residual(total, k, tagged)
    else:
        residual = stasheff_residual(total, k, tagged)
    return untag(residual, "M") + untag(residual, "A")


# ---------------------------------------------------------------------------
# LR-infinity and Poisson L-infinity
# ---------------------------------------------------------------------------


class LRStructure(NamedTuple):
    """Brackets on Q, anchors on A and the two multiplications they obey."""

    brackets: OperationFamily  # linfty on Q
    anchors: OperationFamily  # linfty_module on A
    algebra_product: Product  # A x A -> A
    module_product: Product  # A x Q -> Q


def lr_residual(
    structure: LRStructure,
    k: int,
    inputs: Sequence[GradedElement],
    a: GradedElement,
    condition: str = "lrp",
    b: Optional[GradedElement] = None,
) -> GradedElement:
    """
    Residual of one LR-infinity condition.

    ``condition="lrp"``: lambda_k(q_1..q_{k-1}, a q_k) - nu_k(q_1..q_{k-1}|a) q_k
    - (-1)^(a(q_1+...+q_{k-1}-k)) a lambda_k(q_1..q_k), with inputs q_1..q_k.

    ``condition="derivation"``: nu_k(q..|a b) - nu_k(q..|a) b
    - (-1)^(a(q + 2 - k)) a nu_k(q..|b), with inputs q_1..q_{k-1}.

    ``condition="linearity"``: nu_k(a q_1, q_2..|b) - (-1)^(a(2-k)) a nu_k(q..|b).
    """
    lam, nu = structure.brackets, structure.anchors
    degrees = _degrees(list(inputs) + [a])
    if degrees is None:
        return GradedElement()
    a_degree = degrees[-1]
    if condition == "lrp":
        if len(inputs) != k:
            raise ContractViolation("the LRP condition takes k bracket inputs")
        head, last = list(inputs[:-1]), inputs[-1]
        lhs = lam(k, *head, structure.module_product(a, last))
        anchor = nu(k, *head, a)
        first = structure.module_product(anchor, last) if anchor else GradedElement()
        exponent = a_degree * (sum(degrees[: k - 1]) - k)
        second = structure.module_product(a, lam(k, *inputs)) * parity_sign(exponent)
        return lhs - first - second
    if b is None:
        raise ContractViolation(
            f"condition {condition!r} needs a second algebra element"
        )
    if condition == "derivation":
        if len(inputs) != k - 1:
            raise ContractViolation("the derivation condition takes k-1 bracket inputs")
        q_degree = sum(degrees[: k - 1])
        lhs = nu(k, *inputs, structure.algebra_product(a, b))
        first = structure.algebra_product(nu(k, *inputs, a), b)
        second = structure.algebra_product(a, nu(k, *inputs, b)) * parity_sign(
            a_degree * (q_degree + 2 - k)
        )
        return lhs - first - second
    if condition == "linearity":
        if k < 2 or len(inputs) != k - 1:
            raise ContractViolation("the linearity condition takes k-1 bracket inputs")
        scaled = [structure.module_product(a, inputs[0])] + list(inputs[1:])
        lhs = nu(k, *scaled, b)
        rhs = structure.algebra_product(a, nu(k, *inputs, b)) * parity_sign(
            a_degree * (2 - k)
        )
        return lhs - rhs
    raise ContractViolation(f"unknown LR condition {condition!r}")


def poisson_multiderivation_residual(
    family: OperationFamily,
    k: int,
    position: int,
    inputs: Sequence[GradedElement],
    factor_pair: Tuple[GradedElement, GradedElement],
) -> GradedElement:
    """
    Leibniz residual of Lambda_k in slot ``position`` plus its weight defect.

    The slot is moved last with its Koszul sign and the last-slot rule
    Lambda(u.., a b) = Lambda(u.., a) b + (-1)^(a(u + 2 - k)) a Lambda(u.., b)
    is applied. When the family carries a weight, the part of Lambda_k on the
    inputs outside symmetric weight p_1 + ... + p_k - k + 1 is added.
    """
    product = family.product
    if product is None:
        raise ContractViolation(f"{family.name} carries no commutative product")
    a, b = factor_pair
    slot_value = product(a, b)
    full = list(inputs)
    full[position] = slot_value
    degrees = _degrees(full)
    pair_degrees = _degrees([a, b])
    if degrees is None or pair_degrees is None:
        return GradedElement()
    sigma = tuple(s + 1 for s in range(k) if s != position) + (position + 1,)
    chi = koszul_sign(sigma, degrees)
    rest = [full[s - 1] for s in sigma[:-1]]
    rest_degree = sum(degrees[s - 1] for s in sigma[:-1])
    rhs = product(family(k, *rest, a), b) + product(a, family(k, *rest, b)) * parity_sign(
        pair_degrees[0] * (rest_degree + 2 - k)
    )
    residual = family(k, *full) - rhs * chi
    weight = family.weight
    if weight is not None:
        weights = []
        for element in inputs:
            found = {weight(key) for key in element}
            if len(found) == 1:
                weights.append(found.pop())
        if len(weights) == k:
            expected = sum(weights) - k + 1
            output = family(k, *inputs)
            residual = residual + output.filter(lambda key: weight(key) != expected)
    return residual


def skew_symmetrize(family: OperationFamily) -> OperationFamily:
    """
    The L-infinity family of skew-symmetrizations.

    (A alpha_k)(x_1..x_k) = sum over all permutations sigma of
    chi(sigma, x) alpha_k(x_sigma(1), ..., x_sigma(k)).
    """
    if family.flavor != "ainfty":
        raise ContractViolation("only A-infinity families are skew-symmetrized")

    def make(k: int) -> KeyOperation:
        perms = list(itertools.permutations(range(1, k + 1)))

        def op(*keys: Hashable) -> GradedElement:
            degrees = [key.degree for key in keys]  # type: ignore[attr-defined]
            terms = []
            for sigma in perms:
                value = family.evaluate(k, [keys[s - 1] for s in sigma])
                if value:
                    terms.append(value * koszul_sign(sigma, degrees))
            return GradedElement.sum(terms)

        return op

    ops = {k: make(k) for k in family.ops}
    return OperationFamily(
        "linfty", family.arity_cap, ops, f"A({family.name})", family.product, family.weight
    )


def dg_algebra_family(
    differential: Callable[[Hashable], GradedElement],
    product: Callable[[Hashable, Hashable], GradedElement],
    arity_cap: int = 5,
    flavor: str = "ainfty",
    name: str = "dg",
) -> OperationFamily:
    """Package a DG (Lie) algebra as a family with alpha_k = 0 for k > 2."""
    return OperationFamily(flavor, arity_cap, {1: differential, 2: product}, name)


def structure_table(
    family: OperationFamily, k: int, tuples: Sequence[Sequence[Hashable]]
) -> List[Tuple[Tuple[Hashable, ...], GradedElement]]:
    """Structure constants of the k-ary operation on the given key tuples."""
    return [(tuple(keys), family.evaluate(k, keys)) for keys in tuples]


def first_nonzero_residual(
    residual: Callable[[Sequence[GradedElement]], GradedElement],
    tuples: Sequence[Sequence[GradedElement]],
) -> Optional[Tuple[Sequence[GradedElement], GradedElement]]:
    for inputs in tuples:
        value = residual(inputs)
        if value:
            logger.debug("nonzero residual on %r", inputs)
            return inputs, value
    return None


def counts(family: OperationFamily) -> Dict[str, int]:
    """Memo statistics of a family, for debug logging."""
    memo = family._memo  # pylint: disable=protected-access
    return {"hits": memo.hits, "misses": memo.misses, "size": len(memo)}
