"""
Polynomial foliations in adapted coordinates.

The leaves are spanned by d/dx^1..d/dx^n; the transverse frame is
V_a = d/du^a + V_a^i d/dx^i. Leafwise forms are FormAlgebra elements with
odd generators xi^i = dx-bar^i, so the leaf differential is
d-bar = sum_i xi^i d/dx^i. Derivations of leafwise forms are coordinate
operators; the frame

    theta_i = d/dxi^i,   zeta_i = d/dx^i,
    J_a = d/du^a + V_a^i d/dx^i + (d_k V_a^i) xi^k d/dxi^i

commutes with d-bar except for [d-bar, theta_i] = zeta_i, and gives the
symmetric algebra S over leafwise forms that carries the contraction
(p0, j0, h0).
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import (
    TYPE_CHECKING,
    Callable,
    Dict,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
    Union,
)

from sympy.polys.rings import PolyElement

from ..exceptions import ContractViolation, VerificationError
from ..types import Caps, CheckRecord, Report
from . import faults
from .homotopy import ContractionData, GradedMap
from .kernel import FormAlgebra, FormKey, GradedElement, PolyContext, parity_sign
from .operators import WeylClifford, derivation_residual
from .symmetric import Generator, SymKey, SymmetricAlgebra, SymmetricSplit

if TYPE_CHECKING:
    from .envelope import LieRinehartPresentation

logger = logging.getLogger(__name__)

mono = GradedElement.monomial

VectorField = Dict[int, PolyElement]  # coordinate index -> component
FieldLike = Mapping[int, PolyElement]
FormField = Mapping[int, GradedElement]  # index -> leafwise form


@dataclass
class PolyFoliation:
    """Leaf dimension n, transverse dimension m and the table V[a][i]."""

    n: int
    m: int
    V: Tuple[Tuple[PolyElement, ...], ...]
    context: PolyContext
    forms: FormAlgebra
    weyl: WeylClifford
    R: Dict[Tuple[int, int], Tuple[PolyElement, ...]] = field(default_factory=dict)

    # coordinates ------------------------------------------------------------------

    @property
    def size(self) -> int:
        return self.n + self.m

    def var(self, index: int) -> PolyElement:
        return self.context.ring.gens[index]

    def d(self, f: PolyElement, index: int) -> PolyElement:
        return f.diff(self.var(index))

    def form(self, f: PolyElement, forms: Tuple[int, ...] = ()) -> GradedElement:
        return self.forms.from_poly(f, forms)

    # vector fields on M -------------------------------------------------------------

    def vf_apply(self, X: FieldLike, f: PolyElement) -> PolyElement:
        total = self.context.ring.zero
        for index, component in X.items():
            total += component * self.d(f, index)
        return total

    def vf_bracket(self, X: FieldLike, Y: FieldLike) -> VectorField:
        zero = self.context.ring.zero
        out: VectorField = {}
        for index in range(self.size):
            value = self.vf_apply(X, Y.get(index, zero)) - self.vf_apply(
                Y, X.get(index, zero)
            )
            if value:
                out[index] = value
        return out

    def leaf_field(self, i: int) -> VectorField:
        return {i: self.context.ring.one}

    def transverse_field(self, a: int) -> VectorField:
        field_: VectorField = {self.n + a: self.context.ring.one}
        for i, component in enumerate(self.V[a]):
            if component:
                field_[i] = component
        return field_

    def frame(self, index: int) -> VectorField:
        """Frame E_0..E_{n+m-1}: leaf fields first, then V_1..V_m."""
        if index < self.n:
            return self.leaf_field(index)
        return self.transverse_field(index - self.n)

    def to_frame(self, X: FieldLike) -> VectorField:
        zero = self.context.ring.zero
        out: VectorField = {}
        for a in range(self.m):
            value = X.get(self.n + a, zero)
            if value:
                out[self.n + a] = value
        for i in range(self.n):
            value = X.get(i, zero)
            for a in range(self.m):
                value -= X.get(self.n + a, zero) * self.V[a][i]
            if value:
                out[i] = value
        return out

    def from_frame(self, components: FieldLike) -> VectorField:
        out: VectorField = {}
        for index, coeff in components.items():
            for var, value in self.frame(index).items():
                out[var] = out.get(var, self.context.ring.zero) + coeff * value
        return {k: v for k, v in out.items() if v}

    def leaf_part(self, X: FieldLike) -> VectorField:
        return {k: v for k, v in self.to_frame(X).items() if k < self.n}

    def transverse_part(self, X: FieldLike) -> VectorField:
        return {k: v for k, v in self.to_frame(X).items() if k >= self.n}

    # operators on leafwise forms ------------------------------------------------------

    def vector_operator(self, X: FieldLike) -> GradedElement:
        """X as an even operator on forms (coefficients of dx-bar untouched)."""
        return self.weyl.vector_field({i: self.form(f) for i, f in X.items()})

    def dbar_operator(self) -> GradedElement:
        return self.weyl.vector_field(
            {i: GradedElement.monomial(self.forms.dx(i)) for i in range(self.n)}
        )

    def J(self, a: int) -> GradedElement:
        """The Lie derivative along V_a on leafwise forms."""
        odd: Dict[int, GradedElement] = {}
        for i in range(self.n):
            parts = [
                self.form(self.d(self.V[a][i], k), (k,))
                for k in range(self.n)
                if self.d(self.V[a][i], k)
            ]
            if parts:
                odd[i] = GradedElement.sum(parts)
        even = self.vector_operator(self.transverse_field(a))
        return even + self.weyl.odd_vector_field(odd)

    def frame_operator(self, index: int) -> GradedElement:
        """nabla along frame field ``index`` on leafwise forms."""
        if index < self.n:
            return self.weyl.even_derivative(index)
        return self.J(index - self.n)

    def curvature(self, a: int, b: int) -> Tuple[PolyElement, ...]:
        if a == b:
            return tuple(self.context.ring.zero for _ in range(self.n))
        if (a, b) in self.R:
            return self.R[(a, b)]
        return tuple(-value for value in self.R[(b, a)])


def _parse_entry(
    context: PolyContext, entry: Union[str, int, PolyElement]
) -> PolyElement:
    if isinstance(entry, str):
        return context.parse(entry)
    if isinstance(entry, int):
        return context.constant(entry)
    if getattr(entry, "ring", None) == context.ring:
        return entry
    raise ContractViolation(f"cannot read {entry!r} as a polynomial")


def _commutation_witness(F: PolyFoliation) -> Optional[str]:
    weyl = F.weyl
    for i in range(F.n):
        for a in range(F.m):
            lhs = weyl.commutator(
                F.vector_operator(F.leaf_field(i)),
                F.vector_operator(F.transverse_field(a)),
            )
            rhs = F.vector_operator({j: F.d(F.V[a][j], i) for j in range(F.n)})
            if lhs != rhs:
                return f"[d_{i + 1}, V_{a + 1}]"
    for a in range(F.m):
        for b in range(F.m):
            lhs = weyl.commutator(
                F.vector_operator(F.transverse_field(a)),
                F.vector_operator(F.transverse_field(b)),
            )
            rhs = F.vector_operator(dict(enumerate(F.curvature(a, b))))
            if lhs != rhs:
                return f"[V_{a + 1}, V_{b + 1}]"
    return None


def build_foliation(
    n: int, m: int, table: Sequence[Sequence[Union[str, int, PolyElement]]]
) -> PolyFoliation:
    """
    Parse the table, compute R_ab^i = V_a(V_b^i) - V_b(V_a^i) and verify

        [d_i, V_a] = (d_i V_a^j) d_j,    [V_a, V_b] = R_ab^i d_i

    as operator identities. A failed identity raises VerificationError.
    """
    if n < 1 or m < 0:
        raise ContractViolation("a foliation needs n >= 1 and m >= 0")
    if len(table) != m or any(len(row) != n for row in table):
        raise ContractViolation(f"the V table must have {m} rows of {n} entries")
    context = PolyContext(n, m)
    V = tuple(tuple(_parse_entry(context, entry) for entry in row) for row in table)
    forms = FormAlgebra(context, odd=n)
    F = PolyFoliation(n, m, V, context, forms, WeylClifford(forms))
    for a in range(m):
        for b in range(a + 1, m):
            Va, Vb = F.transverse_field(a), F.transverse_field(b)
            R = tuple(
                F.vf_apply(Va, V[b][i]) - F.vf_apply(Vb, V[a][i]) for i in range(n)
            )
            if faults.active("foliation.curvature"):
                R = tuple(-value for value in R)
            F.R[(a, b)] = R
    witness = _commutation_witness(F)
    if witness is not None:
        record = CheckRecord(
            "foliation.commutators", "[d_i, V_a], [V_a, V_b]", False, witness
        )
        raise VerificationError(f"commutation relations fail at {witness}", record)
    logger.info("built foliation n=%d m=%d", n, m)
    return F


# ---------------------------------------------------------------------------
# The symmetric algebra S over leafwise forms
# ---------------------------------------------------------------------------


def symmetric_algebra(F: PolyFoliation) -> SymmetricAlgebra:
    """Generators theta_1..theta_n, zeta_1..zeta_n, eta_1..eta_m, in that order."""
    generators = [Generator(f"theta{i + 1}", -1, "z") for i in range(F.n)]
    generators += [Generator(f"zeta{i + 1}", 0, "z") for i in range(F.n)]
    generators += [Generator(f"eta{a + 1}", 0, "bar") for a in range(F.m)]
    return SymmetricAlgebra(F.forms, generators)


def theta(F: PolyFoliation, i: int) -> int:
    return i


def zeta(F: PolyFoliation, i: int) -> int:
    return F.n + i


def eta(F: PolyFoliation, a: int) -> int:
    return 2 * F.n + a


def generator_operator(F: PolyFoliation, index: int) -> GradedElement:
    if index < F.n:
        return F.weyl.odd_derivative(index)
    if index < 2 * F.n:
        return F.weyl.even_derivative(index - F.n)
    return F.J(index - 2 * F.n)


def symmetric_split(
    F: PolyFoliation, S: Optional[SymmetricAlgebra] = None
) -> SymmetricSplit:
    """delta_0 theta_i = zeta_i, h_0 zeta_i = theta_i; p_0 keeps only eta."""
    S = S or symmetric_algebra(F)

    def delta_gens(index: int) -> GradedElement:
        return S.generator(zeta(F, index)) if index < F.n else GradedElement()

    def h_gens(index: int) -> GradedElement:
        if F.n <= index < 2 * F.n:
            return S.generator(index - F.n)
        return GradedElement()

    def p_gens(index: int) -> GradedElement:
        return S.generator(index) if index >= 2 * F.n else GradedElement()

    return SymmetricSplit(S, delta_gens, h_gens, p_gens, "S")


def frame_decompose(F: PolyFoliation, op: GradedElement) -> Dict[int, GradedElement]:
    """
    Coefficients of a derivation operator in the frame (theta, zeta, J).

    With b^a = D(u^a): the J_a coefficient is b^a, the zeta_i coefficient is
    D(x^i) - b^a V_a^i and the theta_k coefficient is
    D(xi^k) - b^a (d_j V_a^k) xi^j.
    """
    forms, weyl = F.forms, F.weyl

    def value(key: FormKey) -> GradedElement:
        return weyl.apply(op, GradedElement.monomial(key))

    out: Dict[int, GradedElement] = {}
    b = [value(forms.variable(F.n + a)) for a in range(F.m)]
    for a in range(F.m):
        if b[a]:
            out[eta(F, a)] = b[a]
    for i in range(F.n):
        coeff = value(forms.variable(i))
        for a in range(F.m):
            coeff = coeff - forms.multiply(b[a], F.form(F.V[a][i]))
        if coeff:
            out[zeta(F, i)] = coeff
    for k in range(F.n):
        coeff = value(forms.dx(k))
        for a in range(F.m):
            for j in range(F.n):
                dV = F.d(F.V[a][k], j)
                if dV:
                    coeff = coeff - forms.multiply(b[a], F.form(dV, (j,)))
        if coeff:
            out[theta(F, k)] = coeff
    return out


def frame_element(
    F: PolyFoliation, S: SymmetricAlgebra, op: GradedElement
) -> GradedElement:
    """A derivation operator as a weight-one element of S."""
    parts = [
        S.multiply(S.embed(coeff), S.generator(index))
        for index, coeff in frame_decompose(F, op).items()
    ]
    return GradedElement.sum(parts)


def weight_one_operator(F: PolyFoliation, key: SymKey) -> GradedElement:
    """The derivation operator of a weight-one key omega * g."""
    (index,) = [i for i, e in enumerate(key.exps) if e]
    form_op = F.weyl.multiplication(GradedElement.monomial(key.coeff))
    return F.weyl.compose(form_op, generator_operator(F, index))


# ---------------------------------------------------------------------------
# d-bar in its three guises
# ---------------------------------------------------------------------------


DBAR_KINDS = ("form", "section", "normal")


def dbar(
    F: PolyFoliation,
    element: GradedElement,
    kind: str = "form",
    S: Optional[SymmetricAlgebra] = None,
) -> GradedElement:
    """
    d-bar on leafwise forms, on sections omega * eta_a of X-bar, and on
    normal operators omega * eta^L.

    Sections and normal operators carry the Bott action
    d-bar(omega P) = d-bar(omega) P + (-1)^omega sum_i xi^i omega (d_i . P),
    where d_i . P is the class of [d_i, P] modulo operators ending in a leaf
    derivative.
    """
    if kind not in DBAR_KINDS:
        raise ContractViolation(f"unknown kind {kind!r}")
    if kind == "form":
        return F.forms.d(element)
    S = S or symmetric_algebra(F)
    parts = []
    for key, c in element.items():
        if any(key.exps[: 2 * F.n]):
            raise ContractViolation(f"{S.format_key(key)} is not a normal operator")
        if kind == "section" and key.weight != 1:
            raise ContractViolation(f"{S.format_key(key)} is not a section of X-bar")
        omega = GradedElement.monomial(key.coeff, c)
        word = S.key(F.forms.unit_key, key.exps)
        parts.append(S.multiply(S.embed(F.forms.d(omega)), mono(word)))
        sign = parity_sign(key.coeff.degree)
        for i in range(F.n):
            action = _bott_action(F, S, i, key.exps)
            if action:
                xi_omega = F.forms.multiply(mono(F.forms.dx(i)), omega)
                parts.append(S.multiply(S.embed(xi_omega), action) * sign)
    return GradedElement.sum(parts)


def _bott_action(
    F: PolyFoliation, S: SymmetricAlgebra, i: int, exps: Tuple[int, ...]
) -> GradedElement:
    """Class of [d_i, V_L] with V_L the ordered word of transverse fields."""
    weyl = F.weyl
    word = [a for a in range(F.m) for _ in range(exps[2 * F.n + a])]
    operator = weyl.compose_all(F.vector_operator(F.transverse_field(a)) for a in word)
    commutator = weyl.commutator(weyl.even_derivative(i), operator)
    out = {}
    for key, c in commutator.items():
        if key.odd or any(key.even[: F.n]):
            continue
        exps_out = (0,) * (2 * F.n) + tuple(key.even[F.n :])
        out[S.key(key.coeff, exps_out)] = c
    return GradedElement(out)


# ---------------------------------------------------------------------------
# The adapted connection
# ---------------------------------------------------------------------------


class AdaptedConnection:
    """
    nabla_{d_i} d_j = 0, nabla_{d_i} V_a = 0, nabla_{V_a} d_j = -(d_j V_a^i) d_i
    and nabla_{V_a} V_b = 0, extended as a connection.
    """

    def __init__(self, F: PolyFoliation):
        self.F = F

    def frame_derivative(self, A: int, B: int) -> VectorField:
        F = self.F
        if A >= F.n and B < F.n:
            a = A - F.n
            return {i: -F.d(F.V[a][i], B) for i in range(F.n) if F.d(F.V[a][i], B)}
        return {}

    def covariant(self, X: FieldLike, Y: FieldLike) -> VectorField:
        F = self.F
        Xf, Yf = F.to_frame(X), F.to_frame(Y)
        out: VectorField = {}
        zero = F.context.ring.zero
        for A, xa in Xf.items():
            EA = F.frame(A)
            for B, yb in Yf.items():
                derivative = F.vf_apply(EA, yb)
                if derivative:
                    for var, value in F.frame(B).items():
                        out[var] = out.get(var, zero) + xa * derivative * value
                for var, value in self.frame_derivative(A, B).items():
                    out[var] = out.get(var, zero) + xa * yb * value
        return {k: v for k, v in out.items() if v}

    def torsion(self, X: FieldLike, Y: FieldLike) -> VectorField:
        F = self.F
        parts = [
            self.covariant(X, Y),
            _neg(F, self.covariant(Y, X)),
            _neg(F, F.vf_bracket(X, Y)),
        ]
        return _sum(F, parts)

    def curvature(
        self,
        X: FieldLike,
        Y: FieldLike,
        Z: FieldLike,
    ) -> VectorField:
        F = self.F
        parts = [
            self.covariant(X, self.covariant(Y, Z)),
            _neg(F, self.covariant(Y, self.covariant(X, Z))),
            _neg(F, self.covariant(F.vf_bracket(X, Y), Z)),
        ]
        return _sum(F, parts)

    def operator(self, X: FieldLike) -> GradedElement:
        """nabla_X on leafwise forms: nabla_{d_i} = d/dx^i, nabla_{V_a} = J_a."""
        F = self.F
        parts = [
            F.weyl.compose(F.weyl.multiplication(F.form(coeff)), F.frame_operator(A))
            for A, coeff in F.to_frame(X).items()
        ]
        return GradedElement.sum(parts)

    def curvature_operator(self, X: FieldLike, Y: FieldLike) -> GradedElement:
        """-sum_{j,k} [R(X,Y) d_j]^k xi^j d/dxi^k."""
        F = self.F
        odd: Dict[int, GradedElement] = {}
        for j in range(F.n):
            image = F.to_frame(self.curvature(X, Y, F.leaf_field(j)))
            for k, value in image.items():
                if k >= F.n:
                    continue
                term = F.form(-value, (j,))
                odd[k] = odd.get(k, GradedElement()) + term
        return F.weyl.odd_vector_field({k: v for k, v in odd.items() if v})

    def covector_derivative(self, X: FieldLike, alpha: FieldLike) -> VectorField:
        """(nabla_X alpha)_C = X(alpha_C) - alpha(nabla_X E_C) in the dual frame."""
        F = self.F
        out: VectorField = {}
        for C in range(F.size):
            value = F.vf_apply(X, alpha.get(C, F.context.ring.zero))
            image = F.to_frame(self.covariant(X, F.frame(C)))
            for B, coeff in image.items():
                value -= alpha.get(B, F.context.ring.zero) * coeff
            if value:
                out[C] = value
        return out

    def _bott(
        self, X: FieldLike, Y: FieldLike, part: Callable[[FieldLike], VectorField]
    ) -> VectorField:
        return self.F.from_frame(part(self.F.vf_bracket(X, Y)))

    # verification ------------------------------------------------------------------

    def verify(self) -> Report:
        """Adapted axioms, torsion on the frame and the commutator rule."""
        F = self.F
        report = Report(scenario="connection", seed=0, caps=Caps())
        frame = [F.frame(A) for A in range(F.size)]

        def add(check: str, reference: str, witness: Optional[str]) -> None:
            started = time.perf_counter()
            passed = witness is None
            record = CheckRecord(f"connection.{check}", reference, passed, witness)
            record.elapsed = time.perf_counter() - started
            if witness is not None:
                logger.warning("connection.%s failed: %s", check, witness)
            report.add(record)

        def first(cases: Sequence[Tuple[str, object]]) -> Optional[str]:
            for label, value in cases:
                if value:
                    return f"{label}: {value!r}"
            return None

        leaves, transverse = range(F.n), range(F.n, F.size)
        add(
            "preserves_leaves",
            "nabla_X C in C",
            first(
                [
                    (f"({A},{j})", F.transverse_part(self.covariant(frame[A], X)))
                    for A in range(F.size)
                    for j, X in zip(leaves, frame)
                ]
            ),
        )
        add(
            "preserves_transverse",
            "nabla_X V in V",
            first(
                [
                    (f"({A},{a})", F.leaf_part(self.covariant(frame[A], frame[a])))
                    for A in range(F.size)
                    for a in transverse
                ]
            ),
        )
        add(
            "bott_leaf",
            "nabla_{C} V = pr_V [C, V]",
            first(
                [
                    (
                        f"({i},{a})",
                        _sum(
                            F,
                            [
                                self.covariant(frame[i], frame[a]),
                                _neg(
                                    F, self._bott(frame[i], frame[a], F.transverse_part)
                                ),
                            ],
                        ),
                    )
                    for i in leaves
                    for a in transverse
                ]
            ),
        )
        add(
            "bott_transverse",
            "nabla_{V} C = pr_C [V, C]",
            first(
                [
                    (
                        f"({a},{i})",
                        _sum(
                            F,
                            [
                                self.covariant(frame[a], frame[i]),
                                _neg(F, self._bott(frame[a], frame[i], F.leaf_part)),
                            ],
                        ),
                    )
                    for a in transverse
                    for i in leaves
                ]
            ),
        )
        torsion_cases = []
        for A in range(F.size):
            for B in range(F.size):
                expected: VectorField = {}
                if A >= F.n and B >= F.n:
                    R = F.curvature(A - F.n, B - F.n)
                    expected = {i: -R[i] for i in range(F.n) if R[i]}
                torsion = self.torsion(frame[A], frame[B])
                difference = _sum(F, [torsion, _neg(F, expected)])
                torsion_cases.append((f"T({A},{B})", difference))
        add(
            "torsion",
            "T(V_a, V_b) = -R_ab^i d_i, other frame torsion 0",
            first(torsion_cases),
        )
        weyl = F.weyl
        rule_cases = []
        for A in range(F.size):
            for B in range(A + 1, F.size):
                X, Y = frame[A], frame[B]
                lhs = weyl.commutator(self.operator(X), self.operator(Y))
                rhs = self.operator(F.vf_bracket(X, Y)) + self.curvature_operator(X, Y)
                rule_cases.append((f"[nabla_{A}, nabla_{B}]", lhs - rhs))
        add(
            "commutator_rule",
            "[nabla_X, nabla_Y] - nabla_[X,Y] = R(X, Y) on leafwise forms",
            first(rule_cases),
        )
        covector_cases = []
        for A in range(F.size):
            for B in range(F.size):
                X, Y = frame[A], frame[B]
                for a in range(F.m):
                    du = {F.n + a: F.context.ring.one}
                    nabla = self.covector_derivative
                    lhs = _sum(
                        F,
                        [
                            nabla(X, nabla(Y, du)),
                            _neg(F, nabla(Y, nabla(X, du))),
                            _neg(F, nabla(F.vf_bracket(X, Y), du)),
                        ],
                    )
                    rhs: VectorField = {}
                    for C in range(F.size):
                        image = F.to_frame(self.curvature(X, Y, F.frame(C)))
                        value = -image.get(F.n + a, F.context.ring.zero)
                        if value:
                            rhs[C] = value
                    label = f"du{a + 1} ({A},{B})"
                    covector_cases.append((label, _sum(F, [lhs, _neg(F, rhs)])))
        add(
            "covector_rule",
            "[nabla_X, nabla_Y] - nabla_[X,Y] = R(X, Y) on transverse covectors",
            first(covector_cases),
        )
        return report


def _neg(F: PolyFoliation, X: FieldLike) -> VectorField:
    return {k: -v for k, v in X.items()}


def _sum(F: PolyFoliation, fields: Sequence[FieldLike]) -> VectorField:
    out: VectorField = {}
    for X in fields:
        for k, v in X.items():
            out[k] = out.get(k, F.context.ring.zero) + v
    return {k: v for k, v in out.items() if v}


def build_adapted_connection(F: PolyFoliation) -> AdaptedConnection:
    """Build the connection and raise VerificationError if any axiom fails."""
    connection = AdaptedConnection(F)
    for record in connection.verify().checks:
        if not record.passed:
            message = f"{record.check_id} failed: {record.witness}"
            raise VerificationError(message, record)
    logger.info("adapted connection verified")
    return connection


# ---------------------------------------------------------------------------
# Derivations of leafwise forms
# ---------------------------------------------------------------------------


class DerivationDecomposition(NamedTuple):
    """
    Delta = i_U + L_V + L_W and Delta = i_W' + nabla_V + L_Z.

    Every component maps an index (leaf index for U, V, W'; transverse index
    for W, Z) to a form coefficient.
    """

    degree: int
    U: Dict[int, GradedElement]
    V: Dict[int, GradedElement]
    W: Dict[int, GradedElement]
    W_prime: Dict[int, GradedElement]
    Z: Dict[int, GradedElement]


def _probe_keys(F: PolyFoliation, max_degree: int = 2) -> List[FormKey]:
    return F.forms.basis(max_degree)


def decompose_derivation(
    F: PolyFoliation, op: GradedElement, probe_degree: int = 2
) -> DerivationDecomposition:
    """
    Split a homogeneous derivation operator of leafwise forms.

    With a = Delta(x), b = Delta(u), c = Delta(xi): W = b, V = a - b V and
    U^k = c^k - (-1)^V d-bar V^k - b^a (d_j V_a^k) xi^j.
    """
    degrees = op.degrees()
    if len(degrees) > 1:
        raise ContractViolation("the derivation must be homogeneous")
    degree = degrees[0] if degrees else 0
    if derivation_residual(F.weyl, op, _probe_keys(F, probe_degree)) is not None:
        raise ContractViolation("the operator is not a derivation")
    forms, weyl = F.forms, F.weyl

    def value(key: FormKey) -> GradedElement:
        return weyl.apply(op, GradedElement.monomial(key))

    b = {a: value(forms.variable(F.n + a)) for a in range(F.m)}
    V: Dict[int, GradedElement] = {}
    for i in range(F.n):
        v = value(forms.variable(i))
        for a in range(F.m):
            v = v - forms.multiply(b[a], F.form(F.V[a][i]))
        if v:
            V[i] = v
    sign = parity_sign(degree)
    U: Dict[int, GradedElement] = {}
    W_prime: Dict[int, GradedElement] = {}
    for k in range(F.n):
        u = value(forms.dx(k))
        if k in V:
            u = u - forms.d(V[k]) * sign
        for a in range(F.m):
            for j in range(F.n):
                dV = F.d(F.V[a][k], j)
                if dV:
                    u = u - forms.multiply(b[a], F.form(dV, (j,)))
        if u:
            U[k] = u
        w = u + (forms.d(V[k]) * sign if k in V else GradedElement())
        if w:
            W_prime[k] = w
    W = {a: value_ for a, value_ in b.items() if value_}
    return DerivationDecomposition(degree, U, V, W, W_prime, dict(W))


def contraction_operator(F: PolyFoliation, U: FormField) -> GradedElement:
    """i_U = U^k d/dxi^k."""
    return F.weyl.odd_vector_field(dict(U))


def lie_leaf_operator(F: PolyFoliation, V: FormField, degree: int) -> GradedElement:
    """L-bar_V = V^i d/dx^i + (-1)^V (d-bar V^i) d/dxi^i."""
    sign = parity_sign(degree)
    even = F.weyl.vector_field(dict(V))
    differentials = {i: F.forms.d(v) * sign for i, v in V.items()}
    odd = F.weyl.odd_vector_field({i: dv for i, dv in differentials.items() if dv})
    return even + odd


def lie_transverse_operator(F: PolyFoliation, W: FormField) -> GradedElement:
    """L-bar_W = W^a J_a."""
    parts = [F.weyl.compose(F.weyl.multiplication(w), F.J(a)) for a, w in W.items()]
    return GradedElement.sum(parts)


def reassemble(
    F: PolyFoliation, parts: DerivationDecomposition, form: str = "lie"
) -> GradedElement:
    """Rebuild the operator from either decomposition."""
    if form == "lie":
        return (
            contraction_operator(F, parts.U)
            + lie_leaf_operator(F, parts.V, parts.degree)
            + lie_transverse_operator(F, parts.W)
        )
    if form == "connection":
        nabla_V = F.weyl.vector_field(dict(parts.V))
        return (
            contraction_operator(F, parts.W_prime)
            + nabla_V
            + lie_transverse_operator(F, parts.Z)
        )
    raise ContractViolation(f"unknown decomposition form {form!r}")


def commutator_U(F: PolyFoliation, op: GradedElement) -> Dict[int, GradedElement]:
    """
    U from [Delta, d-bar] restricted to functions plus (-1)^Delta d-bar W^a V_a.

    The d/dx^k coefficients of that operator, with the odd derivatives
    dropped, are U^k; its d/du coefficients vanish.
    """
    weyl = F.weyl
    degree = (op.degrees() or (0,))[0]
    b = [weyl.apply(op, mono(F.forms.variable(F.n + a))) for a in range(F.m)]
    sign = parity_sign(degree)
    total = weyl.commutator(op, F.dbar_operator())
    for a in range(F.m):
        db = F.forms.d(b[a])
        if db:
            field_op = F.vector_operator(F.transverse_field(a))
            total = total + weyl.compose(weyl.multiplication(db), field_op) * sign
    total = weyl.restrict_to_functions(total)
    out: Dict[int, GradedElement] = {}
    for key, c in total.items():
        if key.order != 1:
            raise ContractViolation("the commutator operator is not a vector field")
        (index,) = [i for i, e in enumerate(key.even) if e]
        out.setdefault(index, GradedElement())
        out[index] = out[index] + GradedElement.monomial(key.coeff, c)
    return {k: v for k, v in out.items() if v}


# ---------------------------------------------------------------------------
# The contraction (p0, j0, h0) of derivations onto sections of X-bar
# ---------------------------------------------------------------------------


def contraction_p0j0h0(
    F: PolyFoliation, S: Optional[SymmetricAlgebra] = None
) -> ContractionData:
    """
    Der of leafwise forms, written in the frame as weight-one elements of S,
    onto leafwise forms with values in X-bar.

    p0(Delta) = W eta, j0(W eta) = L-bar_W and h0(Delta) = (-1)^Delta V theta,
    computed from the decomposition of the operator of each frame key.
    """
    S = S or symmetric_algebra(F)
    split = symmetric_split(F, S)
    big, small = split.complexes(weight=1)

    def decomposed(key: SymKey) -> DerivationDecomposition:
        return decompose_derivation(F, weight_one_operator(F, key))

    def p(key: SymKey) -> GradedElement:
        parts = decomposed(key).W
        return GradedElement.sum(
            S.multiply(S.embed(w), S.generator(eta(F, a))) for a, w in parts.items()
        )

    def j(key: SymKey) -> GradedElement:
        if not S.is_bar(key):
            raise ContractViolation(f"{S.format_key(key)} is not a section of X-bar")
        return frame_element(F, S, weight_one_operator(F, key))

    def h(key: SymKey) -> GradedElement:
        parts = decomposed(key)
        sign = parity_sign(parts.degree)
        return GradedElement.sum(
            S.multiply(S.embed(v), S.generator(theta(F, i))) * sign
            for i, v in parts.V.items()
        )

    return ContractionData(
        big,
        small,
        GradedMap(0, p, "p0"),
        GradedMap(0, j, "j0"),
        GradedMap(-1, h, "h0"),
    )


def derivation_presentation(F: PolyFoliation) -> "LieRinehartPresentation":
    """Der of leafwise forms as a Lie-Rinehart algebra on the frame."""
    from .envelope import presentation_from_operators

    S = symmetric_algebra(F)
    operators = [generator_operator(F, index) for index in range(S.size)]
    return presentation_from_operators(
        F.forms,
        [g.name for g in S.generators],
        operators,
        lambda op: frame_decompose(F, op),
        differential=F.dbar_operator(),
        kinds=[g.kind for g in S.generators],
        name="Der",
    )


def frame_basis(F: PolyFoliation, S: SymmetricAlgebra, caps: Caps) -> List[SymKey]:
    """Weight-one keys of S within caps."""
    return S.basis(1, caps.max_degree, caps.max_form_degree, exact_weight=1)
