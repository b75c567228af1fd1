"""
The order-graded perturbation pipeline on a polynomial foliation.

PBW identifies the symmetric algebra S over leafwise forms with the
differential operators on leafwise forms,

    PBW(omega theta_K zeta^J eta^L) = omega i_K sym(nabla_J, nabla_L),

where sym averages the distinct orderings of the connection letters.
Composition and [d-bar, -] are transported through PBW, the symmetric
contraction (p0, j0, h0) is perturbed and the transfer theorem gives an
A-infinity structure on forms with values in normal operators. Symmetric
weight plays the role of order, and the order-(1-k) components of the
structure follow from a short recursion on the order-(-1) part of
composition.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from functools import cached_property, partial
from typing import Callable, Dict, Hashable, List, NamedTuple, Optional, Sequence, Tuple

from sympy import QQ

from ..exceptions import ContractViolation, NonTerminationError, VerificationError
from ..types import Caps, CheckRecord
from ..utils.helpers import MemoTable
from .foliation import (
    AdaptedConnection,
    PolyFoliation,
    build_adapted_connection,
    build_foliation,
    contraction_p0j0h0,
    dbar,
    eta,
    frame_element,
    symmetric_algebra,
    symmetric_split,
    theta,
    weight_one_operator,
    zeta,
)
from .homotopy import Complex, ContractionData, GradedMap
from .kernel import GradedElement, bilinear, multilinear, parity_sign
from .operators import OpKey
from .structures import (
    LRStructure,
    OperationFamily,
    direct_sum_family,
    skew_symmetrize,
    tag,
    untag,
)
from .symmetric import (
    SymKey,
    SymmetricAlgebra,
    SymmetricSplit,
    extend_contraction_symmetric,
    symmetric_words,
)
from .transfer import (
    AInfinityTransfer,
    DGLieCarrier,
    DGModuleCarrier,
    FilteredIsomorphism,
    LInfinityTransfer,
    PerturbedTransfer,
    pbw_perturb_pipeline,
    transfer_module,
)

logger = logging.getLogger(__name__)

mono = GradedElement.monomial


def order_level(key: Hashable) -> int:
    """Symmetric weight of an S key, order of an operator key."""
    if isinstance(key, SymKey):
        return key.weight
    if isinstance(key, OpKey):
        return key.order
    raise ContractViolation(f"{key!r} carries no order")


# ---------------------------------------------------------------------------
# PBW
# ---------------------------------------------------------------------------


class PBWMaps:
    """
    PBW from S to operators on leafwise forms, its inverse and the
    canonical projection p onto forms with values in normal operators.

    The inverse is triangular: the top-order part of an operator is read as
    a symbol in the frame, its PBW image is subtracted and the order drops.
    Forms with values in normal operators are represented by the keys
    omega eta^L of S, so that the underlined PBW is p . PBW . j0.
    """

    def __init__(
        self, F: PolyFoliation, connection: AdaptedConnection, S: SymmetricAlgebra
    ):
        self.F = F
        self.connection = connection
        self.S = S
        self.weyl = F.weyl
        # zeta_i -> nabla_{d_i}, eta_a -> nabla_{V_a}, in S generator order
        self.letters = [connection.operator(F.frame(index)) for index in range(F.size)]
        self.dbar_operator = F.dbar_operator()
        self._sym = MemoTable(name="pbw.sym")
        self._star = MemoTable(name="pbw.circledast")
        self.kappa = [self._transverse_symbol(a) for a in range(F.m)]
        self.forward = GradedMap(0, self._forward_key, "PBW")
        self.inverse = GradedMap(0, self._inverse_key, "PBW^-1")
        self.projection = GradedMap(0, self._project_key, "p")
        self.iso = FilteredIsomorphism(self.forward, self.inverse, order_level, "pbw")

    # symbols in the frame ---------------------------------------------------------

    def _transverse_symbol(self, a: int) -> GradedElement:
        """d/du^a in the frame: eta_a - V_a^i zeta_i - (d_k V_a^i) xi^k theta_i."""
        F, S = self.F, self.S
        parts = [S.generator(eta(F, a))]
        for key, c in self.weyl.order_part(self.letters[F.n + a], 1).items():
            coeff = S.embed(mono(key.coeff, -c))
            if key.odd:
                (k,) = key.odd
                parts.append(S.multiply(coeff, S.generator(theta(F, k))))
            elif any(key.even[: F.n]):
                i = key.even.index(1)
                parts.append(S.multiply(coeff, S.generator(zeta(F, i))))
            elif key.even[F.n + a] != 1 or key.coeff != F.forms.unit_key or c != 1:
                raise ContractViolation(
                    f"nabla_V{a + 1} is not d/du{a + 1} plus leaf terms"
                )
        return GradedElement.sum(parts)

    def frame_symbol(self, op: GradedElement) -> GradedElement:
        """The element of S whose PBW image has the same top-order part as ``op``."""
        F, S = self.F, self.S
        parts = []
        for key, c in op.items():
            factors = [S.embed(mono(key.coeff, c))]
            factors += [S.generator(theta(F, k)) for k in key.odd]
            for i in range(F.n):
                factors += [S.generator(zeta(F, i))] * key.even[i]
            for a in range(F.m):
                factors += [self.kappa[a]] * key.even[F.n + a]
            parts.append(S.multiply_all(factors))
        return GradedElement.sum(parts)

    # the maps ---------------------------------------------------------------------

    def symmetrized(self, exps: Sequence[int]) -> GradedElement:
        """Average of the distinct orderings of the connection letters."""

        def compute() -> GradedElement:
            words = symmetric_words(exps)
            total = GradedElement.sum(
                self.weyl.compose_all(self.letters[i] for i in word) for word in words
            )
            return total * QQ(1, len(words))

        return self._sym.fetch(tuple(exps), compute)  # type: ignore[no-any-return]

    def _forward_key(self, key: SymKey) -> GradedElement:
        n = self.F.n
        factors = [self.weyl.multiplication(mono(key.coeff))]
        factors += [self.weyl.odd_derivative(i) for i in range(n) if key.exps[i]]
        factors.append(self.symmetrized(key.exps[n:]))
        return self.weyl.compose_all(factors)

    def _inverse_key(self, key: OpKey) -> GradedElement:
        remaining = mono(key)
        parts = []
        while remaining:
            top = self.weyl.order(remaining)
            symbol = self.frame_symbol(self.weyl.order_part(remaining, top))
            parts.append(symbol)
            remaining = remaining - self.forward(symbol)
            lower = self.weyl.order(remaining) if remaining else None
            if lower is not None and lower >= top:  # type: ignore[operator]
                raise NonTerminationError(
                    f"PBW is not triangular at {self.weyl.format_key(key)}", element=key
                )
        return GradedElement.sum(parts)

    def _project_key(self, key: OpKey) -> GradedElement:
        """Restrict to functions and drop operators ending in a leaf derivative."""
        n = self.F.n
        if key.odd or any(key.even[:n]):
            return GradedElement()
        return mono(self.S.key(key.coeff, (0,) * (2 * n) + key.even[n:]))

    def underline(self, element: GradedElement) -> GradedElement:
        """p . PBW . j0 on forms with values in normal operators."""
        for key in element:
            if not self.S.is_bar(key):
                raise ContractViolation(
                    f"{self.S.format_key(key)} is not a normal operator"
                )
        return self.projection(self.forward(element))

    # the DG algebra of operators, seen from S --------------------------------------

    def envelope_differential(self) -> GradedMap:
        """[d-bar, -] on operators."""

        def delta(key: OpKey) -> GradedElement:
            return self.weyl.commutator(self.dbar_operator, mono(key))

        return GradedMap(1, delta, "delta_D")

    def compose_keys(self, k1: OpKey, k2: OpKey) -> GradedElement:
        return self.weyl.compose_keys(k1, k2)

    def act(self, key: SymKey, form: Hashable) -> GradedElement:
        """PBW(key) applied to a leafwise form."""
        return self.weyl.apply(self.forward.on_key(key), mono(form))

    def transported_product(self, a: GradedElement, b: GradedElement) -> GradedElement:
        return self.inverse(self.weyl.compose(self.forward(a), self.forward(b)))

    def transported_differential(self, a: GradedElement) -> GradedElement:
        return self.inverse(self.weyl.commutator(self.dbar_operator, self.forward(a)))


def pbw_maps(
    F: PolyFoliation,
    connection: Optional[AdaptedConnection] = None,
    S: Optional[SymmetricAlgebra] = None,
) -> PBWMaps:
    """PBW for the connection; a fresh adapted connection is verified when omitted."""
    connection = connection or build_adapted_connection(F)
    maps = PBWMaps(F, connection, S or symmetric_algebra(F))
    logger.info("PBW ready for n=%d m=%d", F.n, F.m)
    return maps


# ---------------------------------------------------------------------------
# Order components
# ---------------------------------------------------------------------------


def weight_of(element: GradedElement) -> Optional[int]:
    """The symmetric weight of a weight-homogeneous element; None for zero."""
    found = {key.weight for key in element}
    if len(found) > 1:
        raise ContractViolation(f"element mixes weights {sorted(found)}")
    return found.pop() if found else None


def order_component(element: GradedElement, weight: int) -> GradedElement:
    return element.filter(lambda key: key.weight == weight)


def order_components(
    phi: Callable[..., GradedElement], inputs: Sequence[GradedElement], shift: int
) -> GradedElement:
    """
    phi^[shift] on weight-homogeneous inputs: the part of phi(inputs) of
    weight w_1 + ... + w_k + shift.
    """
    weights = [weight_of(x) for x in inputs]
    if any(w is None for w in weights):
        return GradedElement()
    return order_component(phi(*inputs), sum(weights) + shift)  # type: ignore[arg-type]


def projection_component(
    pbw: PBWMaps, element: GradedElement, shift: int
) -> GradedElement:
    """p^[shift] = (p . PBW)^[shift]."""
    return order_components(lambda x: pbw.projection(pbw.forward(x)), [element], shift)


def differential_component(
    pbw: PBWMaps, element: GradedElement, shift: int
) -> GradedElement:
    """(PBW^-1 delta_D PBW)^[shift]."""
    return order_components(pbw.transported_differential, [element], shift)


# ---------------------------------------------------------------------------
# The order-(-1) part of composition
# ---------------------------------------------------------------------------


def stratum(key: SymKey, n: int) -> Tuple[int, int, int]:
    """(number of theta, number of zeta, number of eta) of a key."""
    return sum(key.exps[:n]), sum(key.exps[n : 2 * n]), sum(key.exps[2 * n :])


def circledast_strata(r: int, s: int, l: int, m: int) -> List[Tuple[int, int, int]]:
    """Where the product of strata (r, 0, l) and (s, 0, m) can land."""
    return [
        (r + s, 1, l + m - 2),
        (r + s + 1, 0, l + m - 2),
        (r + s, 0, l + m - 1),
        (r + s - 1, 0, l + m),
    ]


def _parts(
    pbw: PBWMaps, key: SymKey
) -> Tuple[GradedElement, List[int], Tuple[int, ...]]:
    n = pbw.F.n
    if any(key.exps[n : 2 * n]):
        raise ContractViolation(
            f"stratum violation: {pbw.S.format_key(key)} carries a leaf derivative"
        )
    return mono(key.coeff), [i for i in range(n) if key.exps[i]], key.exps[2 * n :]


def _eta_power(pbw: PBWMaps, exps: Sequence[int]) -> GradedElement:
    S, n = pbw.S, pbw.F.n
    return mono(S.key(pbw.F.forms.unit_key, (0,) * (2 * n) + tuple(exps)))


def _minus(exps: Sequence[int], *indices: int) -> Tuple[int, ...]:
    out = list(exps)
    for index in indices:
        out[index] -= 1
    return tuple(out)


def _circledast_keys(pbw: PBWMaps, k1: SymKey, k2: SymKey) -> GradedElement:
    F, S, weyl = pbw.F, pbw.S, pbw.weyl
    w1, K1, L1 = _parts(pbw, k1)
    w2, K2, L2 = _parts(pbw, k2)
    thetas1 = S.multiply_all([S.generator(theta(F, i)) for i in K1])
    thetas2 = S.multiply_all([S.generator(theta(F, i)) for i in K2])
    contractions1 = weyl.compose_all(weyl.odd_derivative(i) for i in K1)
    contractions2 = weyl.compose_all(weyl.odd_derivative(i) for i in K2)
    L = tuple(a + b for a, b in zip(L1, L2))
    terms = []

    # i_{K1} hitting omega_2
    if K1:
        composed = weyl.compose(contractions1, weyl.multiplication(w2))
        hit = weyl.order_part(composed, len(K1) - 1)
        symbol = pbw.frame_symbol(hit)
        terms.append(S.multiply_all([S.embed(w1), symbol, thetas2, _eta_power(pbw, L)]))

    # nabla_{V_a} from the first factor acting on omega_2 i_{K2}
    second = weyl.compose(weyl.multiplication(w2), contractions2)
    for a in range(F.m):
        if not L1[a]:
            continue
        moved = weyl.order_part(weyl.commutator(pbw.letters[F.n + a], second), len(K2))
        symbol = pbw.frame_symbol(moved)
        factors = [S.embed(w1), thetas1, symbol, _eta_power(pbw, _minus(L, a))]
        terms.append(S.multiply_all(factors) * L1[a])

    # half the commutator of nabla_{V_a} and nabla_{V_b}
    head = S.multiply_all([S.embed(w1), thetas1, S.embed(w2), thetas2])
    if head:
        for a in range(F.m):
            for b in range(F.m):
                if not (L1[a] and L2[b]) or a == b:
                    continue
                commutator = weyl.commutator(pbw.letters[F.n + a], pbw.letters[F.n + b])
                curvature = frame_element(F, S, commutator)
                if not curvature:
                    continue
                factors = [head, curvature, _eta_power(pbw, _minus(L, a, b))]
                terms.append(S.multiply_all(factors) * QQ(L1[a] * L2[b], 2))
    return GradedElement.sum(terms)


def circledast(pbw: PBWMaps, a: GradedElement, b: GradedElement) -> GradedElement:
    """
    The order-(-1) component of transported composition on elements free of
    zeta: a contraction term, a transport term and a curvature term.
    """

    def product(k1: SymKey, k2: SymKey) -> GradedElement:
        compute = partial(_circledast_keys, pbw, k1, k2)
        return pbw._star.fetch((k1, k2), compute)  # type: ignore

    return bilinear(product, a, b)


def circledast_by_composition(
    pbw: PBWMaps, a: GradedElement, b: GradedElement
) -> GradedElement:
    """The same component read off PBW^-1(PBW a . PBW b)."""

    def product(k1: SymKey, k2: SymKey) -> GradedElement:
        _parts(pbw, k1)
        _parts(pbw, k2)
        full = pbw.transported_product(mono(k1), mono(k2))
        return order_component(full, k1.weight + k2.weight - 1)

    return bilinear(product, a, b)


# ---------------------------------------------------------------------------
# Leading components and closed forms
# ---------------------------------------------------------------------------


class LeadingComponents:
    """
    The order-(1-k) components of the transferred structure, from

        eps_1 = -j0,   eps_k = sum_{l+m=k} (-1)^a(l,m,x) gamma_l (*) gamma_m,
        gamma_1 = -j0,  gamma_k = h0 eps_k,  alpha_k = p0 eps_k,

    where (*) is the order-(-1) part of composition.
    """

    def __init__(self, pbw: PBWMaps, split: SymmetricSplit, arity_cap: int = 5):
        self.pbw = pbw
        self.arity_cap = arity_cap
        self.h0 = split.homotopy()
        self.p0 = split.projection()
        self.gammas = MemoTable(name="leading.gamma")

    def _check(self, k: int, keys: Sequence[SymKey]) -> None:
        if not 1 <= k <= self.arity_cap or len(keys) != k:
            raise ContractViolation(f"arity {k} with {len(keys)} inputs")
        for key in keys:
            if not self.pbw.S.is_bar(key):
                raise ContractViolation(
                    f"{self.pbw.S.format_key(key)} is not a normal operator"
                )

    def epsilon(self, k: int, keys: Sequence[SymKey]) -> GradedElement:
        self._check(k, keys)
        if k == 1:
            return -mono(keys[0])
        degrees = [key.degree for key in keys]
        terms = []
        for l in range(1, k):
            m = k - l
            left = self.gamma(l, keys[:l])
            if not left:
                continue
            right = self.gamma(m, keys[l:])
            if not right:
                continue
            sign = parity_sign(AInfinityTransfer.sign_exponent(l, m, degrees))
            terms.append(circledast(self.pbw, left, right) * sign)
        return GradedElement.sum(terms)

    def gamma(self, k: int, keys: Sequence[SymKey]) -> GradedElement:
        keys = tuple(keys)

        def compute() -> GradedElement:
            if k == 1:
                return self.epsilon(1, keys)
            return self.h0(self.epsilon(k, keys))

        return self.gammas.fetch((k, keys), compute)  # type: ignore[no-any-return]

    def alpha(self, k: int, keys: Sequence[SymKey]) -> GradedElement:
        if k < 2:
            raise ContractViolation("leading components start at arity 2")
        return self.p0(self.epsilon(k, keys))


def _bar_parts(pbw: PBWMaps, key: SymKey) -> Tuple[GradedElement, Tuple[int, ...]]:
    if not pbw.S.is_bar(key):
        raise ContractViolation(f"{pbw.S.format_key(key)} is not a normal operator")
    return mono(key.coeff), key.exps[2 * pbw.F.n :]


def _alpha2_top(pbw: PBWMaps, k1: SymKey, k2: SymKey) -> GradedElement:
    return pbw.S.product(k1, k2)


def _alpha2_next(pbw: PBWMaps, k1: SymKey, k2: SymKey) -> GradedElement:
    """sum_a c_a omega_1 (nabla_{V_a} omega_2) eta^(L_1 + L_2 - a)."""
    F, S = pbw.F, pbw.S
    w1, L1 = _bar_parts(pbw, k1)
    w2, L2 = _bar_parts(pbw, k2)
    L = tuple(a + b for a, b in zip(L1, L2))
    terms = []
    for a in range(F.m):
        if L1[a]:
            moved = pbw.weyl.apply(pbw.letters[F.n + a], w2)
            factors = [S.embed(w1), S.embed(moved), _eta_power(pbw, _minus(L, a))]
            terms.append(S.multiply_all(factors) * L1[a])
    return GradedElement.sum(terms)


def _alpha3_curvature(
    pbw: PBWMaps, k1: SymKey, k2: SymKey, k3: SymKey
) -> GradedElement:
    """
    1/2 sum_{a in L1, b in L2} c_a c_b (-1)^(omega_1 + omega_2)
        omega_1 omega_2 R_ab^i (i_{d_i} omega_3) eta^(L1 + L2 + L3 - a - b).
    """
    F, S = pbw.F, pbw.S
    forms = F.forms
    w1, L1 = _bar_parts(pbw, k1)
    w2, L2 = _bar_parts(pbw, k2)
    _, L3 = _bar_parts(pbw, k3)
    L = tuple(a + b + c for a, b, c in zip(L1, L2, L3))
    sign = parity_sign(k1.coeff.degree + k2.coeff.degree)
    head = forms.multiply(w1, w2)
    terms = []
    for a in range(F.m):
        for b in range(F.m):
            if not (L1[a] and L2[b]):
                continue
            for i, R in enumerate(F.curvature(a, b)):
                if not R:
                    continue
                contracted = forms.odd_derivative(k3.coeff, i)
                if not contracted:
                    continue
                coeff = forms.multiply(forms.multiply(head, F.form(R)), contracted)
                scale = QQ(L1[a] * L2[b], 2) * sign
                eta = _eta_power(pbw, _minus(L, a, b))
                terms.append(S.multiply(S.embed(coeff), eta) * scale)
    return GradedElement.sum(terms)


CLOSED_FORMS = {
    (2, 0): _alpha2_top,
    (2, -1): _alpha2_next,
    (3, -2): _alpha3_curvature,
}


def closed_form_alphas(
    pbw: PBWMaps, k: int, inputs: Sequence[GradedElement]
) -> Dict[int, GradedElement]:
    """The displayed order components of alpha_k, by order shift."""
    if len(inputs) != k:
        raise ContractViolation(f"arity {k} given {len(inputs)} inputs")
    out = {}
    for (arity, shift), formula in CLOSED_FORMS.items():
        if arity == k:
            action = lambda *keys, f=formula: f(pbw, *keys)  # noqa: E731
            out[shift] = multilinear(action, inputs)
    if not out:
        raise ContractViolation(f"no closed form at arity {k}")
    return out


def displayed_alpha3_coefficient(t: int) -> object:
    """The coefficient 2t/(t+1) of the published curvature formula."""
    return QQ(2 * t, t + 1)


def derived_alpha3_coefficient(r: int, s: int) -> object:
    """The coefficient rs/2 the recursion gives in tensor components."""
    return QQ(r * s, 2)


# ---------------------------------------------------------------------------
# The pipeline
# ---------------------------------------------------------------------------


def forms_complex(F: PolyFoliation) -> Complex:
    """Leafwise forms with d-bar."""

    def basis(caps: Caps) -> List[Hashable]:
        return list(F.forms.basis(caps.max_degree, caps.max_form_degree))

    return Complex("Lambda", basis, GradedMap(1, F.forms.differential, "dbar"))


@dataclass
class PipelineResult:
    """Everything ``run_pipeline`` builds, in construction order."""

    F: PolyFoliation
    connection: AdaptedConnection
    S: SymmetricAlgebra
    split: SymmetricSplit
    linear: ContractionData
    symmetric: ContractionData
    pbw: PBWMaps
    perturbed: PerturbedTransfer
    module: DGModuleCarrier
    module_family: OperationFamily
    arity_cap: int

    @property
    def family(self) -> OperationFamily:
        return self.perturbed.family

    @property
    def engine(self) -> AInfinityTransfer:
        return self.perturbed.engine

    @cached_property
    def leading(self) -> LeadingComponents:
        return LeadingComponents(self.pbw, self.split, self.arity_cap)

    @cached_property
    def skew_sum(self) -> OperationFamily:
        """A alpha on the direct sum of normal operators and forms."""
        total = direct_sum_family(self.family, self.module_family, "alpha+mu")
        return skew_symmetrize(total)

    @cached_property
    def skew_alpha(self) -> OperationFamily:
        return skew_symmetrize(self.family)


def _record(
    check_id: str, reference: str, witness: Optional[str], **details: object
) -> CheckRecord:
    return CheckRecord(check_id, reference, witness is None, witness, dict(details))


def perturbation_records(result: PipelineResult, caps: Caps) -> List[CheckRecord]:
    """p_t = p . PBW on S and d-bar_t = d-bar_D on normal operators."""
    records = []
    started = time.perf_counter()
    contraction, pbw = result.perturbed.contraction, result.pbw
    witness = None
    keys = list(contraction.big.basis(caps))
    for key in keys:
        if contraction.p.on_key(key) != pbw.projection(pbw.forward.on_key(key)):
            witness = result.S.format_key(key)
            break
    record = _record(
        "pipeline.p_t", "p_t coincides with the canonical projection", witness,
        basis_size=len(keys),
    )
    record.elapsed = time.perf_counter() - started
    records.append(record)

    started = time.perf_counter()
    witness = None
    small = list(contraction.small.basis(caps))
    for key in small:
        expected = dbar(result.F, mono(key), "normal", result.S)
        if result.perturbed.d_small.on_key(key) != expected:
            witness = result.S.format_key(key)
            break
    record = _record(
        "pipeline.dbar_t", "d-bar_t = d-bar_D on normal operators", witness,
        basis_size=len(small),
    )
    record.elapsed = time.perf_counter() - started
    records.append(record)
    return records


def run_pipeline(
    F: PolyFoliation, caps: Optional[Caps] = None, verify: bool = True
) -> PipelineResult:
    """
    Connection, PBW, symmetric contraction, perturbation, transfer of the
    operator algebra and of its action on leafwise forms.

    With ``verify`` the symmetric extension is checked against the linear
    contraction and p_t = p, d-bar_t = d-bar_D are asserted on the basis
    within caps; a failure raises VerificationError.
    """
    caps = caps or Caps()
    arity_cap = caps.max_arity
    connection = build_adapted_connection(F)
    S = symmetric_algebra(F)
    split = symmetric_split(F, S)
    linear = contraction_p0j0h0(F, S)
    symmetric = extend_contraction_symmetric(linear, split, caps if verify else None)
    pbw = pbw_maps(F, connection, S)
    perturbed = pbw_perturb_pipeline(
        symmetric,
        pbw.iso,
        pbw.envelope_differential(),
        pbw.compose_keys,
        arity_cap,
        caps,
        unit=S.one,
    )
    logger.info("perturbation done, transferring the action on forms")
    module = DGModuleCarrier(perturbed.algebra, forms_complex(F), pbw.act, "Lambda")
    module_family = transfer_module(perturbed.contraction, module, arity_cap)
    result = PipelineResult(
        F,
        connection,
        S,
        split,
        linear,
        symmetric,
        pbw,
        perturbed,
        module,
        module_family,
        arity_cap,
    )
    if verify:
        for record in perturbation_records(result, caps):
            if not record.passed:
                raise VerificationError(
                    f"{record.check_id} failed at {record.witness}", record
                )
    return result


def toy_foliation(n: int) -> PolyFoliation:
    """The foliation of R^n by a single leaf."""
    return build_foliation(n, 0, [])


# ---------------------------------------------------------------------------
# LR-infinity structure on forms with values in X-bar
# ---------------------------------------------------------------------------


def derivation_operator(F: PolyFoliation, element: GradedElement) -> GradedElement:
    """The derivation operator of a weight-one element of S."""
    parts = []
    for key, c in element.items():
        if key.weight != 1:
            raise ContractViolation(f"{key!r} is not a derivation")
        parts.append(weight_one_operator(F, key) * c)
    return GradedElement.sum(parts)


class FoliationLR(NamedTuple):
    structure: LRStructure
    engine: LInfinityTransfer
    lie: DGLieCarrier
    contraction: ContractionData


def foliation_lr_structure(
    F: PolyFoliation, arity_cap: int = 4, S: Optional[SymmetricAlgebra] = None
) -> FoliationLR:
    """
    The derivations of leafwise forms transferred along (p0, j0, h0).

    Brackets are the transferred lambda_k in the symmetric-tree normalization;
    the anchors are nu_1 = d-bar and nu_k(Z..|omega) = (-1)^(k-1) psi_{k-1}(Z..)(omega).
    """
    S = S or symmetric_algebra(F)
    c0 = contraction_p0j0h0(F, S)
    weyl = F.weyl

    def bracket(k1: SymKey, k2: SymKey) -> GradedElement:
        a, b = weight_one_operator(F, k1), weight_one_operator(F, k2)
        commutator = weyl.commutator(a, b)
        return frame_element(F, S, commutator)

    lie = DGLieCarrier(c0.big, bracket, "Der")
    engine = LInfinityTransfer(c0, lie, arity_cap, standard=True, name="lambda")
    brackets = OperationFamily(
        "lr_infty", arity_cap, engine.family().ops, "lambda", engine=engine
    )

    def anchor(k: int) -> Callable[..., GradedElement]:
        def op(*keys: Hashable) -> GradedElement:
            *fields, form = keys
            if k == 1:
                return F.forms.differential(form)  # type: ignore[arg-type]
            psi = engine.psi(k - 1, fields)
            value = weyl.apply(derivation_operator(F, psi), mono(form))
            return value * parity_sign(k - 1)

        return op

    anchors = OperationFamily(
        "linfty_module",
        arity_cap,
        {k: anchor(k) for k in range(1, arity_cap + 1)},
        "nu",
    )
    structure = LRStructure(
        brackets,
        anchors,
        F.forms.multiply,
        lambda a, q: S.multiply(S.embed(a), q),
    )
    logger.info(
        "LR-infinity structure on forms with values in X-bar, arity <= %d", arity_cap
    )
    return FoliationLR(structure, engine, lie, c0)


def enveloping_sh_identity(
    result: PipelineResult,
    lr: FoliationLR,
    k: int,
    fields: Sequence[GradedElement],
    omega: GradedElement,
) -> GradedElement:
    """nu_k(Z_1..Z_{k-1}|omega) - (A alpha_k)(Z_1..Z_{k-1}, omega)."""
    if len(fields) != k - 1:
        raise ContractViolation(f"arity {k} takes {k - 1} sections")
    inputs = [tag(z, "A") for z in fields] + [tag(omega, "M")]
    skew = untag(result.skew_sum(k, *inputs), "M")
    return lr.structure.anchors(k, *fields, omega) - skew


def skew_bracket_residual(
    result: PipelineResult, lr: FoliationLR, k: int, fields: Sequence[GradedElement]
) -> GradedElement:
    """(A alpha_k)(Z_1..Z_k) - lambda_k(Z_1..Z_k) on sections of X-bar."""
    return result.skew_alpha(k, *fields) - lr.structure.brackets(k, *fields)


# ---------------------------------------------------------------------------
# Poisson transfer
# ---------------------------------------------------------------------------


def poisson_bracket(pbw: PBWMaps, k1: SymKey, k2: SymKey) -> GradedElement:
    """The weight w1 + w2 - 1 part of PBW^-1 [PBW k1, PBW k2]."""
    commutator = pbw.weyl.commutator(pbw.forward.on_key(k1), pbw.forward.on_key(k2))
    return order_component(pbw.inverse(commutator), k1.weight + k2.weight - 1)


def poisson_transfer(
    pbw: PBWMaps, c_sym: ContractionData, arity_cap: int = 4
) -> OperationFamily:
    """
    The Poisson bracket of S transferred along the symmetric contraction.

    The resulting lambda_k on S-bar are multiderivations of the symmetric
    product, checked with ``poisson_multiderivation_residual``.
    """
    memo = MemoTable(name="poisson")

    def bracket(k1: SymKey, k2: SymKey) -> GradedElement:
        compute = partial(poisson_bracket, pbw, k1, k2)
        return memo.fetch((k1, k2), compute)  # type: ignore

    lie = DGLieCarrier(c_sym.big, bracket, "S_Poisson")
    engine = LInfinityTransfer(c_sym, lie, arity_cap, standard=True, name="Lambda")
    logger.info("transferring the Poisson bracket, arity <= %d", arity_cap)
    return OperationFamily(
        "poisson_linfty",
        arity_cap,
        engine.family().ops,
        "Lambda",
        product=pbw.S.multiply,
        weight=lambda key: key.weight,  # type: ignore[attr-defined]
        engine=engine,
    )
