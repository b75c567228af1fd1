"""
Acceptance checks for sh-transfer.

Every check group is a function from a ``CheckContext`` to check records,
registered under the name scenarios list in ``checks``. The context builds
the foliation, the pipeline and the transferred structures once, lazily,
and shares them between groups. Groups may run on worker threads; the
resulting report is ordered by check id when it is written.
"""

from __future__ import annotations

import logging
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import ExitStack
from dataclasses import dataclass, replace
from functools import partial
from typing import Any, Callable, Dict, Hashable, List, Optional, Sequence, Tuple

from ..core.envelope import (
    DiffOp,
    compose,
    diffop_order_test,
    envelope_report,
    monomial_probes,
    poisson_bracket_symbols,
    quantize,
    symbol,
    symbol_algebra,
)
from ..core.faults import KNOWN_FAULTS, inject_fault
from ..core.foliation import (
    PolyFoliation,
    build_foliation,
    commutator_U,
    decompose_derivation,
    derivation_presentation,
    frame_basis,
    reassemble,
    weight_one_operator,
)
from ..core.homotopy import verify_contraction
from ..core.kernel import FormKey, GradedElement, parity_sign
from ..core.pipeline import (
    CLOSED_FORMS,
    FoliationLR,
    PipelineResult,
    circledast,
    circledast_by_composition,
    circledast_strata,
    closed_form_alphas,
    derived_alpha3_coefficient,
    displayed_alpha3_coefficient,
    enveloping_sh_identity,
    foliation_lr_structure,
    order_components,
    perturbation_records,
    poisson_transfer,
    projection_component,
    run_pipeline,
    skew_bracket_residual,
    stratum,
    toy_foliation,
)
from ..core.structures import (
    OperationFamily,
    linfty_residual,
    lr_residual,
    module_residual,
    poisson_multiderivation_residual,
    stasheff_residual,
)
from ..core.symmetric import SymKey
from ..core.transfer import module_closed_form, unit_check, verify_filtered
from ..exceptions import ShTransferError
from ..types import Caps, CheckRecord, Report, Scenario
from .helpers import (
    first_nonzero,
    format_rational,
    seeded_choice,
    seeded_product,
    seeded_tuples,
)

logger = logging.getLogger(__name__)

mono = GradedElement.monomial

FOLIATION_KINDS = ("foliation", "toy")
ALL_KINDS = ("foliation", "toy", "abstract")
PROJECTION_SAMPLES = 100
CONFLUENCE_WORDS = 100
LR_ARITY = 3
POISSON_ARITY = 4
MODULE_ARITY = 4
STRUCTURE_SAMPLES = 40  # per record in the lr, enveloping, module and poisson groups


# ---------------------------------------------------------------------------
# Context
# ---------------------------------------------------------------------------


def scenario_foliation(scenario: Scenario) -> PolyFoliation:
    """The foliation a scenario describes; abstract scenarios use R^n."""
    if scenario.kind == "foliation":
        return build_foliation(scenario.n, scenario.m, scenario.V)
    return toy_foliation(scenario.n)


class CheckContext:
    """Lazily built, thread-safe shared state of one scenario run."""

    def __init__(self, scenario: Scenario, caps: Optional[Caps] = None, jobs: int = 1):
        self.scenario = scenario
        self.caps = caps or scenario.caps
        self.seed = scenario.seed
        self.jobs = jobs
        self._lock = threading.RLock()
        self._cache: Dict[str, Any] = {}

    def _lazy(self, name: str, build: Callable[[], Any]) -> Any:
        with self._lock:
            if name not in self._cache:
                started = time.perf_counter()
                self._cache[name] = build()
                logger.info("%s ready in %.2fs", name, time.perf_counter() - started)
            return self._cache[name]

    @property
    def foliation(self) -> PolyFoliation:
        return self._lazy("foliation", lambda: scenario_foliation(self.scenario))  # type: ignore

    @property
    def pipeline(self) -> PipelineResult:
        return self._lazy(  # type: ignore[no-any-return]
            "pipeline", lambda: run_pipeline(self.foliation, self.caps, verify=False)
        )

    @property
    def lr(self) -> FoliationLR:
        cap = min(POISSON_ARITY, self.caps.max_arity)
        return self._lazy(  # type: ignore[no-any-return]
            "lr", lambda: foliation_lr_structure(self.foliation, cap, self.pipeline.S)
        )

    @property
    def poisson(self) -> OperationFamily:
        cap = min(POISSON_ARITY, self.caps.max_arity)
        result = self.pipeline
        return self._lazy(  # type: ignore[no-any-return]
            "poisson", lambda: poisson_transfer(result.pbw, result.symmetric, cap)
        )

    def small_keys(self) -> List[SymKey]:
        """Forms with values in normal operators, within caps."""
        return list(self.pipeline.perturbed.contraction.small.basis(self.caps))

    def sections(self) -> List[SymKey]:
        """Forms with values in X-bar, within caps."""
        S = self.pipeline.S
        return S.basis(
            1, self.caps.max_degree, self.caps.max_form_degree, bar_only=True, exact_weight=1
        )

    def forms(self) -> List[FormKey]:
        return self.foliation.forms.basis(self.caps.max_degree, self.caps.max_form_degree)

    def limit(self, cap: Optional[int] = None) -> int:
        """Sample count per record, at most ``cap`` when given."""
        return self.caps.samples if cap is None else min(self.caps.samples, cap)

    def tuples(
        self, pool: Sequence[Hashable], k: int, salt: int = 0, cap: Optional[int] = None
    ) -> List[Tuple[Any, ...]]:
        return seeded_tuples(pool, k, self.limit(cap), self.seed + 101 * salt)

    def product(
        self,
        pools: Sequence[Sequence[Hashable]],
        salt: int = 0,
        cap: Optional[int] = None,
    ) -> List[Tuple[Any, ...]]:
        return seeded_product(pools, self.limit(cap), self.seed + 101 * salt)

    def format_key(self, key: Hashable) -> str:
        if isinstance(key, SymKey):
            return self.pipeline.S.format_key(key)
        if isinstance(key, FormKey):
            return self.foliation.forms.format_key(key)
        return repr(key)

    def describe(self, keys: Sequence[Hashable]) -> str:
        return "(" + ", ".join(self.format_key(key) for key in keys) + ")"


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------


CheckFn = Callable[[CheckContext], List[CheckRecord]]


@dataclass(frozen=True)
class CheckSpec:
    name: str
    reference: str
    run: CheckFn
    kinds: Tuple[str, ...]


CHECKS: Dict[str, CheckSpec] = {}


def check(
    name: str, reference: str, kinds: Tuple[str, ...] = FOLIATION_KINDS
) -> Callable[[CheckFn], CheckFn]:
    """Register a check group."""

    def register(fn: CheckFn) -> CheckFn:
        CHECKS[name] = CheckSpec(name, reference, fn, kinds)
        return fn

    return register


def scan(
    ctx: CheckContext,
    check_id: str,
    reference: str,
    items: Sequence[Any],
    residual: Callable[[Any], GradedElement],
    describe: Optional[Callable[[Any], str]] = None,
    **details: Any,
) -> CheckRecord:
    """A record whose witness is the first item with a nonzero residual."""
    started = time.perf_counter()
    found = first_nonzero(items, residual)
    witness = None
    if found is not None:
        item, value = found
        shown = describe(item) if describe else ctx.describe(item)
        witness = f"{shown} -> {value!r}"
        logger.warning("%s failed at %s", check_id, shown)
    record = CheckRecord(
        check_id, reference, witness is None, witness, {"samples": len(items), **details}
    )
    record.elapsed = time.perf_counter() - started
    return record


def _monos(keys: Sequence[Hashable]) -> List[GradedElement]:
    return [mono(key) for key in keys]


# ---------------------------------------------------------------------------
# Contractions and the foliation model
# ---------------------------------------------------------------------------


@check("contraction", "contraction axioms of (p0, j0, h0) and its symmetric extension")
def check_contraction(ctx: CheckContext) -> List[CheckRecord]:
    result = ctx.pipeline
    records = verify_contraction(result.linear, ctx.caps, ctx.jobs, "contraction.linear").checks
    records += verify_contraction(
        result.symmetric, ctx.caps, ctx.jobs, "contraction.symmetric"
    ).checks
    return records


@check("connection", "adapted torsion-quasi-free connection, curvature and torsion")
def check_connection(ctx: CheckContext) -> List[CheckRecord]:
    return ctx.pipeline.connection.verify().checks


@check("decomposition", "derivations split as i_U + L_V + L_W and i_W' + nabla_V + L_Z")
def check_decomposition(ctx: CheckContext) -> List[CheckRecord]:
    F, S = ctx.foliation, ctx.pipeline.S
    keys = seeded_choice(frame_basis(F, S, ctx.caps), ctx.caps.samples, ctx.seed)
    probe = ctx.caps.probe_degree or 2
    records = []
    for form in ("lie", "connection"):

        def residual(key: SymKey, form: str = form) -> GradedElement:
            op = weight_one_operator(F, key)
            return reassemble(F, decompose_derivation(F, op, probe), form) - op

        records.append(
            scan(
                ctx,
                f"decomposition.{form}",
                "the decomposition reassembles the derivation",
                keys,
                residual,
                S.format_key,
            )
        )

    def commutator_residual(key: SymKey) -> GradedElement:
        op = weight_one_operator(F, key)
        U = decompose_derivation(F, op, probe).U
        found = commutator_U(F, op)
        zero = GradedElement()
        return GradedElement.sum(
            S.multiply(S.embed(found.get(k, zero) - U.get(k, zero)), S.generator(k))
            for k in set(U) | set(found)
        )

    records.append(
        scan(
            ctx,
            "decomposition.commutator",
            "U is read off from the commutator with d-bar",
            keys,
            commutator_residual,
            S.format_key,
        )
    )
    return records


# ---------------------------------------------------------------------------
# Perturbation and transfer
# ---------------------------------------------------------------------------


@check("perturbation", "perturbed contraction, p_t = p and d-bar_t = d-bar_D")
def check_perturbation(ctx: CheckContext) -> List[CheckRecord]:
    result = ctx.pipeline
    records = verify_contraction(
        result.perturbed.contraction, ctx.caps, ctx.jobs, "pipeline.perturbed"
    ).checks
    return records + perturbation_records(result, ctx.caps)


@check("stasheff", "Stasheff identities of the transferred A-infinity structure")
def check_stasheff(ctx: CheckContext) -> List[CheckRecord]:
    family, keys = ctx.pipeline.family, ctx.small_keys()
    records = []
    for k in range(1, ctx.caps.max_arity + 1):
        records.append(
            scan(
                ctx,
                f"pipeline.stasheff.k{k}",
                f"Stasheff identity of arity {k}",
                ctx.tuples(keys, k, salt=k),
                lambda t, k=k: stasheff_residual(family, k, _monos(t)),
            )
        )
    return records


@check("unit", "strict unitality of the transferred structure")
def check_unit(ctx: CheckContext) -> List[CheckRecord]:
    result = ctx.pipeline
    return [unit_check(result.family, result.perturbed.contraction, result.S.one, ctx.caps, ctx.seed)]


@check("closed_forms", "closed forms of alpha_2 and alpha_3 against the transfer")
def check_closed_forms(ctx: CheckContext) -> List[CheckRecord]:
    result, keys = ctx.pipeline, ctx.small_keys()
    records = []
    for salt, (k, shift) in enumerate(sorted(CLOSED_FORMS)):
        if k > ctx.caps.max_arity:
            continue

        def residual(
            t: Tuple[SymKey, ...], k: int = k, shift: int = shift
        ) -> GradedElement:
            inputs = _monos(t)
            transferred = order_components(lambda *xs: result.family(k, *xs), inputs, shift)
            return transferred - closed_form_alphas(result.pbw, k, inputs)[shift]

        details: Dict[str, Any] = {}
        if (k, shift) == (3, -2):
            details = {
                "displayed_coefficient": format_rational(displayed_alpha3_coefficient(1)),
                "derived_coefficient": format_rational(derived_alpha3_coefficient(1, 1)),
            }
        records.append(
            scan(
                ctx,
                f"pipeline.closed_form.alpha{k}[{shift}]",
                f"alpha_{k}^[{shift}] equals its closed form",
                ctx.tuples(keys, k, salt=salt),
                residual,
                **details,
            )
        )
    return records


@check("leading", "order bounds and the recursion for the leading components")
def check_leading(ctx: CheckContext) -> List[CheckRecord]:
    result, keys = ctx.pipeline, ctx.small_keys()
    records = []
    for k in range(2, ctx.caps.max_arity + 1):
        tuples = ctx.tuples(keys, k, salt=k)
        top = 0 if k == 2 else 1 - k

        def above(t: Tuple[SymKey, ...], k: int = k, top: int = top) -> GradedElement:
            bound = sum(key.weight for key in t) + top
            return result.family(k, *_monos(t)).filter(lambda key: key.weight > bound)

        def recursion(t: Tuple[SymKey, ...], k: int = k) -> GradedElement:
            inputs = _monos(t)
            component = order_components(lambda *xs: result.family(k, *xs), inputs, 1 - k)
            return component - result.leading.alpha(k, t)

        records.append(
            scan(ctx, f"pipeline.order_bound.alpha{k}", f"alpha_{k} has order <= {top}", tuples, above)
        )
        records.append(
            scan(
                ctx,
                f"pipeline.leading.alpha{k}",
                f"alpha_{k}^[{1 - k}] follows the order-(-1) recursion",
                tuples,
                recursion,
            )
        )
    return records


@check("vanishing", "alpha_k^[1-k] = 0 for k > 3")
def check_vanishing(ctx: CheckContext) -> List[CheckRecord]:
    result, keys = ctx.pipeline, ctx.small_keys()
    records = []
    for k in range(4, ctx.caps.max_arity + 1):
        records.append(
            scan(
                ctx,
                f"pipeline.vanishing.alpha{k}",
                f"alpha_{k}^[{1 - k}] = 0",
                ctx.tuples(keys, k, salt=k),
                lambda t, k=k: result.leading.alpha(k, t),
            )
        )
    return records


@check("trivial", "alpha_k = 0 for k >= 3 without curvature")
def check_trivial(ctx: CheckContext) -> List[CheckRecord]:
    result, keys = ctx.pipeline, ctx.small_keys()
    records = []
    for k in range(3, ctx.caps.max_arity + 1):
        records.append(
            scan(
                ctx,
                f"pipeline.trivial.alpha{k}",
                f"alpha_{k} = 0",
                ctx.tuples(keys, k, salt=k),
                lambda t, k=k: result.family(k, *_monos(t)),
            )
        )
    return records


@check("projection", "p^[-1] = 0 on random operators of each order")
def check_projection(ctx: CheckContext) -> List[CheckRecord]:
    result = ctx.pipeline
    S, caps = result.S, ctx.caps
    rng = random.Random(ctx.seed)
    records = []
    for weight in range(1, caps.max_order + 1):
        pool = S.basis(weight, caps.max_degree, caps.max_form_degree, exact_weight=weight)
        elements = [
            GradedElement.sum(
                mono(rng.choice(pool), rng.randint(-3, 3) or 1) for _ in range(3)
            )
            for _ in range(PROJECTION_SAMPLES)
        ]
        records.append(
            scan(
                ctx,
                f"pipeline.projection.order{weight}",
                "p^[-1] = 0",
                elements,
                lambda x: projection_component(result.pbw, x, -1),
                repr,
            )
        )
    return records


@check("circledast", "the order-(-1) part of composition and its strata")
def check_circledast(ctx: CheckContext) -> List[CheckRecord]:
    result, caps = ctx.pipeline, ctx.caps
    F, S, pbw = result.F, result.S, result.pbw
    n = F.n
    pool = [
        key
        for key in S.basis(caps.max_order, caps.max_degree, caps.max_form_degree)
        if not any(key.exps[n : 2 * n])
    ]
    pairs = ctx.tuples(pool, 2, salt=2)

    def against_composition(t: Tuple[SymKey, SymKey]) -> GradedElement:
        a, b = _monos(t)
        return circledast(pbw, a, b) - circledast_by_composition(pbw, a, b)

    def outside_strata(t: Tuple[SymKey, SymKey]) -> GradedElement:
        (r, _, l), (s, _, m) = stratum(t[0], n), stratum(t[1], n)
        allowed = circledast_strata(r, s, l, m)
        value = circledast(pbw, *_monos(t))
        return value.filter(lambda key: stratum(key, n) not in allowed)

    return [
        scan(
            ctx,
            "pipeline.circledast.composition",
            "the three-term formula equals the order-(-1) part of composition",
            pairs,
            against_composition,
        ),
        scan(ctx, "pipeline.circledast.strata", "products land in the predicted strata", pairs, outside_strata),
    ]


@check("pbw", "PBW is a filtered isomorphism and the underlined PBW is the identity")
def check_pbw(ctx: CheckContext) -> List[CheckRecord]:
    result, caps = ctx.pipeline, ctx.caps
    S, pbw, weyl = result.S, result.pbw, result.pbw.weyl
    keys = seeded_choice(
        S.basis(caps.max_order, caps.max_degree, caps.max_form_degree), caps.samples, ctx.seed
    )

    def leading(key: SymKey) -> GradedElement:
        return weyl.order_part(pbw.forward.on_key(key), key.weight)

    records = [verify_filtered(pbw.iso, keys, leading)]
    records.append(
        scan(
            ctx,
            "pbw.symbol",
            "the top-order part of PBW(s) has frame symbol s",
            keys,
            lambda key: pbw.frame_symbol(leading(key)) - mono(key),
            S.format_key,
        )
    )
    bar = [key for key in keys if S.is_bar(key)]
    records.append(
        scan(
            ctx,
            "pbw.underline",
            "p . PBW . j0 is the identity on normal operators",
            bar,
            lambda key: pbw.underline(mono(key)) - mono(key),
            S.format_key,
        )
    )
    return records


@check("poisson", "transferred Poisson brackets are multiderivations with the weight rule")
def check_poisson(ctx: CheckContext) -> List[CheckRecord]:
    family, keys = ctx.poisson, ctx.small_keys()
    records = []
    for k in range(1, family.arity_cap + 1):
        tuples = ctx.tuples(keys, k + 2, salt=k, cap=STRUCTURE_SAMPLES)

        def residual(t: Tuple[SymKey, ...], k: int = k) -> GradedElement:
            elements = _monos(t)
            position = sum(key.weight for key in t) % k
            pair = (elements[k], elements[k + 1])
            return poisson_multiderivation_residual(family, k, position, elements[:k], pair)

        records.append(
            scan(
                ctx,
                f"poisson.multiderivation.k{k}",
                f"Lambda_{k} is a multiderivation of weight sum - {k - 1}",
                tuples,
                residual,
            )
        )
    return records


@check("module", "transferred action on leafwise forms")
def check_module(ctx: CheckContext) -> List[CheckRecord]:
    result = ctx.pipeline
    family, forms, keys = result.module_family, ctx.forms(), ctx.small_keys()
    d = result.F.forms.differential
    records = [
        scan(
            ctx,
            "pipeline.module.mu1",
            "mu_1 = d-bar",
            forms,
            lambda key: family.evaluate(1, (key,)) - d(key),
            ctx.format_key,
        )
    ]
    for k in range(2, ctx.caps.max_arity + 1):
        pools = [keys] * (k - 1) + [forms]
        tuples = ctx.product(pools, salt=k, cap=STRUCTURE_SAMPLES)
        records.append(
            scan(
                ctx,
                f"pipeline.module.closed_form{k}",
                f"mu_{k} = (-1)^{k - 1} gamma_{k - 1}(..) acting on omega",
                tuples,
                lambda t, k=k: family.evaluate(k, t)
                - module_closed_form(result.engine, result.module, t),
            )
        )
    for k in range(1, min(MODULE_ARITY, ctx.caps.max_arity) + 1):
        pools = [keys] * (k - 1) + [forms]
        tuples = ctx.product(pools, salt=10 + k, cap=STRUCTURE_SAMPLES)
        records.append(
            scan(
                ctx,
                f"pipeline.module.identity{k}",
                f"A-infinity module identity of arity {k}",
                tuples,
                lambda t, k=k: module_residual(result.family, family, k, _monos(t)),
            )
        )
    return records


# ---------------------------------------------------------------------------
# LR-infinity structure and the enveloping identity
# ---------------------------------------------------------------------------


@check("lr", "LR-infinity conditions of the transferred derivations")
def check_lr(ctx: CheckContext) -> List[CheckRecord]:
    structure = ctx.lr.structure
    sections, forms = ctx.sections(), ctx.forms()
    draw = partial(ctx.tuples, cap=STRUCTURE_SAMPLES)
    sample = partial(ctx.product, cap=STRUCTURE_SAMPLES)
    cap = min(LR_ARITY, ctx.caps.max_arity)
    records = []
    for k in range(1, cap + 1):
        records.append(
            scan(
                ctx,
                f"lr.jacobi{k}",
                f"generalized Jacobi identity of arity {k}",
                draw(sections, k, salt=k),
                lambda t, k=k: linfty_residual(structure.brackets, k, _monos(t)),
            )
        )
        records.append(
            scan(
                ctx,
                f"lr.leibniz{k}",
                "lambda_k(q.., a q) = nu_k(q..|a) q + (-1)^.. a lambda_k(q.., q)",
                sample([sections] * k + [forms], salt=20 + k),
                lambda t, k=k: lr_residual(structure, k, _monos(t[:-1]), mono(t[-1])),
            )
        )
        records.append(
            scan(
                ctx,
                f"lr.derivation{k}",
                "nu_k(q..|-) is a derivation of forms",
                sample([sections] * (k - 1) + [forms, forms], salt=30 + k),
                lambda t, k=k: lr_residual(
                    structure, k, _monos(t[:-2]), mono(t[-2]), "derivation", mono(t[-1])
                ),
            )
        )
        if k >= 2:
            records.append(
                scan(
                    ctx,
                    f"lr.linearity{k}",
                    "nu_k is form-linear in its sections",
                    sample([sections] * (k - 1) + [forms, forms], salt=40 + k),
                    lambda t, k=k: lr_residual(
                        structure, k, _monos(t[:-2]), mono(t[-2]), "linearity", mono(t[-1])
                    ),
                )
            )
    return records


@check("enveloping", "nu_k and lambda_k are skew-symmetrizations of the transferred structure")
def check_enveloping(ctx: CheckContext) -> List[CheckRecord]:
    result, lr = ctx.pipeline, ctx.lr
    sections, forms = ctx.sections(), ctx.forms()
    draw = partial(ctx.tuples, cap=STRUCTURE_SAMPLES)
    sample = partial(ctx.product, cap=STRUCTURE_SAMPLES)
    cap = min(LR_ARITY, ctx.caps.max_arity)
    records = []
    for k in range(1, cap + 1):
        records.append(
            scan(
                ctx,
                f"pipeline.enveloping.nu{k}",
                f"nu_{k}(Z..|omega) = (A alpha_{k})(Z.., omega)",
                sample([sections] * (k - 1) + [forms], salt=50 + k),
                lambda t, k=k: enveloping_sh_identity(
                    result, lr, k, _monos(t[:-1]), mono(t[-1])
                ),
            )
        )
        records.append(
            scan(
                ctx,
                f"pipeline.skew_bracket.lambda{k}",
                f"(A alpha_{k})(Z..) = lambda_{k}(Z..)",
                draw(sections, k, salt=60 + k),
                lambda t, k=k: skew_bracket_residual(result, lr, k, _monos(t)),
            )
        )
    return records


@check("audit", "memoized evaluation agrees with fresh evaluation")
def check_audit(ctx: CheckContext) -> List[CheckRecord]:
    count = ctx.caps.audits
    return [
        ctx.pipeline.engine.audit(count, ctx.seed),
        ctx.lr.engine.audit(count, ctx.seed),
    ]


# ---------------------------------------------------------------------------
# Envelope and symbol calculus
# ---------------------------------------------------------------------------


@check("envelope", "rewriting confluence, operator morphism and Gr commutativity", ALL_KINDS)
def check_envelope(ctx: CheckContext) -> List[CheckRecord]:
    F = ctx.foliation
    pres = derivation_presentation(F)
    probes = monomial_probes(F.forms, min(ctx.caps.max_degree, 2))
    records = pres.verify(probes).checks
    forms = F.forms.basis(1, 1)
    letters: List[Any] = list(range(pres.size)) + forms
    rng = random.Random(ctx.seed)
    words = [
        tuple(rng.choice(letters) for _ in range(rng.randint(2, 4)))
        for _ in range(CONFLUENCE_WORDS)
    ]
    elements = [pres.generator(i) for i in range(pres.size)]
    elements += [pres.embed(mono(key)) for key in forms]
    elements += [
        pres.scale(F.form(F.var(i)), pres.generator(a))
        for i in range(F.size)
        for a in range(pres.size)
    ]
    samples = seeded_tuples(elements, 2, ctx.caps.samples, ctx.seed)
    return records + envelope_report(pres, samples, words)  # type: ignore[arg-type]


@check("symbols", "symbol multiplicativity, Poisson axioms and the order test", ALL_KINDS)
def check_symbols(ctx: CheckContext) -> List[CheckRecord]:
    F, caps = ctx.foliation, ctx.caps
    weyl = F.weyl
    sym = symbol_algebra(weyl)
    degree = min(caps.max_degree, 2)
    orders = range(1, min(caps.max_order, 2) + 1)
    pool = [(key, key.weight) for l in orders for key in sym.basis(l, degree, exact_weight=l)]

    def describe(t: Sequence[Tuple[SymKey, int]]) -> str:
        return ", ".join(sym.format_key(key) for key, _ in t)

    def bracket(
        a: Tuple[GradedElement, int], b: Tuple[GradedElement, int]
    ) -> Tuple[GradedElement, int]:
        return poisson_bracket_symbols(weyl, a[0], a[1], b[0], b[1]), a[1] + b[1] - 1

    def lift(t: Sequence[Tuple[SymKey, int]]) -> List[Tuple[GradedElement, int]]:
        return [(mono(key), l) for key, l in t]

    def multiplicative(t: Sequence[Tuple[SymKey, int]]) -> GradedElement:
        (s1, l1), (s2, l2) = lift(t)
        op = compose(DiffOp(weyl, quantize(weyl, s1), l1), DiffOp(weyl, quantize(weyl, s2), l2))
        return symbol(op, l1 + l2) - sym.multiply(s1, s2)

    def antisymmetric(t: Sequence[Tuple[SymKey, int]]) -> GradedElement:
        a, b = lift(t)
        sign = parity_sign(t[0][0].degree * t[1][0].degree)
        return bracket(a, b)[0] + bracket(b, a)[0] * sign

    def jacobi(t: Sequence[Tuple[SymKey, int]]) -> GradedElement:
        a, b, c = lift(t)
        sign = parity_sign(t[0][0].degree * t[1][0].degree)
        lhs = bracket(a, bracket(b, c))[0]
        return lhs - bracket(bracket(a, b), c)[0] - bracket(b, bracket(a, c))[0] * sign

    def leibniz(t: Sequence[Tuple[SymKey, int]]) -> GradedElement:
        a, b, c = lift(t)
        sign = parity_sign(t[0][0].degree * t[1][0].degree)
        bc = (sym.multiply(b[0], c[0]), b[1] + c[1])
        lhs = bracket(a, bc)[0]
        first = sym.multiply(bracket(a, b)[0], c[0])
        second = sym.multiply(b[0], bracket(a, c)[0]) * sign
        return lhs - first - second

    probes = monomial_probes(F.forms, (caps.probe_degree or 2))

    def order(t: Sequence[Tuple[SymKey, int]]) -> GradedElement:
        key, l = t[0]
        op = DiffOp(weyl, quantize(weyl, mono(key)), l)
        if diffop_order_test(op, l, probes, F.forms.multiply, key.degree):
            return GradedElement()
        return mono(key)

    pairs = ctx.tuples(pool, 2, salt=2)
    triples = ctx.tuples(pool, 3, salt=3)
    cases = [
        ("multiplicative", "sigma(P Q) = sigma(P) sigma(Q)", pairs, multiplicative),
        ("antisymmetry", "graded antisymmetry of {,}", pairs, antisymmetric),
        ("jacobi", "graded Jacobi identity of {,}", triples, jacobi),
        ("leibniz", "{,} is a biderivation", triples, leibniz),
        ("order", "quantized symbols pass the order test", ctx.tuples(pool, 1, salt=1), order),
    ]
    return [
        scan(ctx, f"symbols.{name}", reference, items, residual, describe)
        for name, reference, items, residual in cases
    ]


# ---------------------------------------------------------------------------
# Runners
# ---------------------------------------------------------------------------


def run_check(ctx: CheckContext, name: str) -> List[CheckRecord]:
    """Run one group; an ShTransferError becomes a failing record."""
    spec = CHECKS[name]
    started = time.perf_counter()
    try:
        records = spec.run(ctx)
    except ShTransferError as exc:
        logger.warning("check group %s raised %s: %s", name, type(exc).__name__, exc)
        record = CheckRecord(
            f"{name}.error", spec.reference, False, f"{type(exc).__name__}: {exc}"
        )
        record.elapsed = time.perf_counter() - started
        records = [record]
    failed = sum(not record.passed for record in records)
    logger.info(
        "%s: %d records, %d failed, %.2fs", name, len(records), failed, time.perf_counter() - started
    )
    return records


def run_checks(
    scenario: Scenario, caps: Optional[Caps] = None, jobs: int = 1
) -> Report:
    """
    Run the scenario's check groups with its faults injected.

    Args:
        scenario: Validated scenario
        caps: Caps replacing the scenario's own, when given
        jobs: Worker threads for independent groups

    Returns:
        Report with every record of every group
    """
    caps = caps or scenario.caps
    report = Report(scenario=scenario.name, seed=scenario.seed, caps=caps)
    names = list(dict.fromkeys(scenario.checks))
    if not names:
        return report
    ctx = CheckContext(scenario, caps, jobs)
    with ExitStack() as stack:
        for fault in scenario.faults:
            stack.enter_context(inject_fault(fault))
        if jobs > 1 and len(names) > 1:
            with ThreadPoolExecutor(max_workers=jobs) as executor:
                results = list(executor.map(lambda name: run_check(ctx, name), names))
        else:
            results = [run_check(ctx, name) for name in names]
    for records in results:
        for record in records:
            report.add(record)
    return report


# ---------------------------------------------------------------------------
# Built-in acceptance suite
# ---------------------------------------------------------------------------


SELFCHECK_CAPS = Caps(max_arity=5, max_order=3, max_degree=2, samples=200, audits=20)
FOLIATION_SUITE = (
    "contraction",
    "connection",
    "decomposition",
    "perturbation",
    "stasheff",
    "unit",
    "closed_forms",
    "leading",
    "vanishing",
    "projection",
    "circledast",
    "pbw",
    "poisson",
    "module",
    "lr",
    "enveloping",
    "audit",
)
MUTATION_SUITE = ("envelope", "perturbation", "stasheff", "enveloping")


def mutation_caps(caps: Caps) -> Caps:
    """Caps of the mutation runs: arity 4 at most, 60 samples and 5 audits."""
    return replace(
        caps,
        max_arity=min(caps.max_arity, 4),
        samples=min(caps.samples, 60),
        audits=min(caps.audits, 5),
    )


def builtin_scenarios(caps: Optional[Caps] = None) -> List[Scenario]:
    """The scenarios ``selfcheck`` runs, in order."""
    caps = caps or SELFCHECK_CAPS
    return [
        Scenario("flat", "foliation", 1, 1, [["0"]], caps, list(FOLIATION_SUITE) + ["trivial"]),
        Scenario("F1", "foliation", 1, 2, [["u2"], ["0"]], caps, list(FOLIATION_SUITE)),
        Scenario(
            "F2",
            "foliation",
            1,
            2,
            [["x1*u2"], ["0"]],
            caps,
            ["stasheff", "closed_forms", "leading", "circledast"],
        ),
        Scenario(
            "toy",
            "toy",
            2,
            0,
            [],
            caps,
            ["contraction", "perturbation", "stasheff", "trivial", "module", "unit"],
        ),
        Scenario("abstract", "abstract", 2, 0, [], caps, ["envelope", "symbols"]),
    ]


def mutation_records(caps: Optional[Caps] = None, seed: int = 0) -> List[CheckRecord]:
    """
    Run a fast suite on F1 once per known fault.

    A record passes when the faulty run fails. The groups of one run share
    their pipeline and the run stops at the first group with a failure.
    Faults are process-wide, so the runs are sequential.
    """
    caps = mutation_caps(caps or SELFCHECK_CAPS)
    records = []
    for fault in KNOWN_FAULTS:
        started = time.perf_counter()
        scenario = Scenario(
            f"F1+{fault}", "foliation", 1, 2, [["u2"], ["0"]], caps,
            list(MUTATION_SUITE), seed, [fault],
        )
        ctx = CheckContext(scenario, caps)
        caught: List[str] = []
        with inject_fault(fault):
            for name in MUTATION_SUITE:
                caught = [r.check_id for r in run_check(ctx, name) if not r.passed]
                if caught:
                    logger.info("mutation %s caught by %s", fault, name)
                    break
        caught.sort()
        record = CheckRecord(
            f"mutation.{fault}",
            "an injected single-sign fault is caught",
            bool(caught),
            None if caught else "no check failed",
            {"caught_by": caught[:5]},
        )
        record.elapsed = time.perf_counter() - started
        records.append(record)
    return records


def selfcheck(
    caps: Optional[Caps] = None, jobs: int = 1, mutations: bool = True
) -> Report:
    """The built-in acceptance suite as one report, ids prefixed by scenario."""
    caps = caps or SELFCHECK_CAPS
    report = Report(scenario="selfcheck", seed=0, caps=caps)
    for scenario in builtin_scenarios(caps):
        for record in run_checks(scenario, caps, jobs).checks:
            report.add(replace(record, check_id=f"{scenario.name}.{record.check_id}"))
    if mutations:
        for record in mutation_records(caps):
            report.add(record)
    return report
