"""Degree-scheduled certificate searches.

Every search walks degrees d0..d_max through the Gram reduction and stops at
the smallest degree with a verified certificate.  Without one, an infeasible
degree turns into a separating state; the state is only a truncated
separation and "not found up to d_max" never proves non-membership.
"""

from __future__ import annotations

import logging
import math
import time
import warnings
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from itertools import combinations
from typing import Any

import numpy as np

from .config import DEFAULT_CONFIG, CertifierConfig
from .errors import (
    CertifierError,
    DegreeTooSmall,
    IndefiniteBlock,
    InputError,
    NegativeSemidefiniteInput,
    NonScalarGenerator,
    NotArchimedeanWarning,
    ProductModuleTooLarge,
    RationalizationFailed,
    RayNotVerifiable,
    SubstitutionMismatch,
)
from .gram import (
    BlockKind,
    BlockSpec,
    CertificateBlock,
    EqualityMultiplier,
    GramProblem,
    MembershipCertificate,
    ModulePresentation,
    WeightedFactor,
    build_membership_sdp,
    certificate_from_solution,
    rationalize,
    verify_certificate,
)
from .numla import sym_eigen
from .observability import get_logger, log_event
from .polycore import MatrixPoly, ScalarPoly, congruence, mul, substitute_matrix, to_fraction
from .sdp import SdpSolution, SdpStatus, solve_feasibility
from .states import (
    NotExtractable,
    PointVectorPair,
    SeparatingState,
    extract_point,
    state_from_dual,
    verify_point,
)

logger = get_logger(__name__)

PRODUCT_MODULE_LIMIT = 20
POINT_EPS = 1e-6


class Verdict(str, Enum):
    FOUND = "CertificateFound"
    SEPARATED = "Separated"
    EXHAUSTED = "ExhaustedDegrees"


@dataclass(frozen=True)
class DegreeAttempt:
    degree: int
    status: str
    reason: str = ""


@dataclass(frozen=True, eq=False)
class SearchOutcome:
    verdict: Verdict
    degree: int
    elapsed_ms: float
    certificate: MembershipCertificate | None = None
    state: SeparatingState | None = None
    pair: PointVectorPair | None = None
    transformers: tuple[WeightedFactor, ...] = ()
    rearranged: MembershipCertificate | None = None
    attempts: tuple[DegreeAttempt, ...] = ()
    epsilon: float = 0.0
    notes: dict[str, Any] = field(default_factory=dict)
    substitution_residual: MatrixPoly | None = None


@dataclass(frozen=True, eq=False)
class LowerBound:
    status: SdpStatus
    degree: int
    bound: float | None
    state: SeparatingState | None = None
    certificate: MembershipCertificate | None = None


@dataclass(frozen=True, eq=False)
class ArchWitness:
    n_bound: int
    degree: int
    certificate: MembershipCertificate

    @property
    def radius(self) -> float:
        return math.sqrt(self.n_bound)


@dataclass(frozen=True)
class ArchNotFound:
    tried: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class CharPolyResult:
    q: ScalarPoly
    kind: str = "characteristic"
    verified: bool = True


@dataclass(frozen=True)
class ConstantWitness:
    """sum_i weight * B_i^T A B_i = I with B_i = u e_i^T."""

    weight: Fraction
    u: tuple[Fraction, ...]
    matrices: tuple[tuple[tuple[Fraction, ...], ...], ...]

    def check(self, a: Sequence[Sequence[object]]) -> list[list[Fraction]]:
        t = len(self.u)
        am = [[_frac(v) for v in row] for row in a]
        total = [[Fraction(0)] * t for _ in range(t)]
        for b in self.matrices:
            bta = [[sum((b[k][i] * am[k][j] for k in range(t)), Fraction(0)) for j in range(t)] for i in range(t)]
            for i in range(t):
                for j in range(t):
                    total[i][j] += self.weight * sum((bta[i][k] * b[k][j] for k in range(t)), Fraction(0))
        return total


def _frac(value: object) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise InputError(f"cannot read {value!r} as a rational number")


# =============================================================================
# MEMBERSHIP
# =============================================================================


def _start_degree(f: MatrixPoly) -> int:
    return max(math.ceil(max(f.degree, 0) / 2), 0)


def _certify_solution(
    sol: SdpSolution, problem: GramProblem, cfg: CertifierConfig
) -> tuple[MembershipCertificate | None, str]:
    try:
        cert = certificate_from_solution(sol, problem, cfg.sdp_options)
    except IndefiniteBlock as exc:
        return None, exc.message
    if cfg.exact:
        try:
            return rationalize(cert, cfg.max_denominator, cfg.feas_tol), "exact"
        except RationalizationFailed as exc:
            log_event(logger, "rationalize.failed", logging.INFO, degree=problem.degree, reason=exc.message)
    if cert.residual is not None and cert.residual.passed:
        return cert, "numeric"
    return None, "numeric verification failed"


@dataclass(frozen=True, eq=False)
class _DegreeResult:
    attempt: DegreeAttempt
    certificate: MembershipCertificate | None = None
    problem: GramProblem | None = None
    solution: SdpSolution | None = None


def _attempt(target: MatrixPoly, presentation: ModulePresentation, d: int, cfg: CertifierConfig) -> _DegreeResult:
    try:
        problem = build_membership_sdp(target, presentation, d)
    except DegreeTooSmall as exc:
        return _DegreeResult(DegreeAttempt(d, "DegreeTooSmall", exc.message))
    sol = solve_feasibility(problem.instance, cfg.sdp_options)
    cert = None
    reason = str(sol.metrics.get("reason", ""))
    if sol.status is SdpStatus.FEASIBLE:
        cert, reason = _certify_solution(sol, problem, cfg)
    log_event(logger, "certify.degree", degree=d, status=sol.status.value, found=cert is not None, reason=reason)
    return _DegreeResult(DegreeAttempt(d, sol.status.value, reason), cert, problem, sol)


def _run_schedule(
    target: MatrixPoly, presentation: ModulePresentation, degrees: Sequence[int], cfg: CertifierConfig
) -> list[_DegreeResult]:
    """Results up to and including the first certified degree, in degree order."""
    results: list[_DegreeResult] = []
    if cfg.parallel_degrees and len(degrees) > 1:
        with ThreadPoolExecutor(max_workers=cfg.max_workers) as executor:
            futures = [executor.submit(_attempt, target, presentation, d, cfg) for d in degrees]
            for future in futures:
                res = future.result()
                results.append(res)
                if res.certificate is not None:
                    for pending in futures:
                        pending.cancel()
                    break
        return results
    for d in degrees:
        res = _attempt(target, presentation, d, cfg)
        results.append(res)
        if res.certificate is not None:
            break
    return results


def _degree_range(f: MatrixPoly, d_max: int | None, d_min: int | None, cfg: CertifierConfig) -> list[int]:
    d0 = max(_start_degree(f), d_min or 0)
    if d_max is None:
        d_max = cfg.dmax if cfg.dmax is not None else d0 + cfg.extra_degrees
    return list(range(d0, max(d_max, d0) + 1))


def find_membership(
    f: MatrixPoly,
    presentation: ModulePresentation,
    d_max: int | None = None,
    config: CertifierConfig = DEFAULT_CONFIG,
    *,
    epsilon: float = 0.0,
    d_min: int | None = None,
    extract: bool = True,
) -> SearchOutcome:
    """Search f (+ epsilon I) in the module degree by degree."""
    started = time.perf_counter()
    if epsilon < 0:
        raise InputError("epsilon must be nonnegative")
    target = f
    if epsilon > 0:
        target = f + MatrixPoly.identity(f.n, f.t).scale(Fraction(epsilon).limit_denominator(10**12))
    degrees = _degree_range(target, d_max, d_min, config)
    results = _run_schedule(target, presentation, degrees, config)
    attempts = tuple(r.attempt for r in results)
    elapsed = _elapsed(started)

    last = results[-1]
    if last.certificate is not None:
        outcome = SearchOutcome(
            Verdict.FOUND,
            last.attempt.degree,
            elapsed,
            certificate=last.certificate,
            attempts=attempts,
            epsilon=epsilon,
            notes={"exact": last.certificate.exact},
        )
        _log_outcome(outcome)
        return outcome

    infeasible = [r for r in results if r.attempt.status == SdpStatus.INFEASIBLE.value]
    if not infeasible:
        outcome = SearchOutcome(Verdict.EXHAUSTED, degrees[-1], elapsed, attempts=attempts, epsilon=epsilon)
        _log_outcome(outcome)
        return outcome

    state: SeparatingState | None = None
    pair: PointVectorPair | None = None
    notes: dict[str, Any] = {}
    if extract:
        state, pair, notes = _separate(target, presentation, infeasible, config)
    else:
        top = infeasible[-1]
        assert top.problem is not None and top.solution is not None
        try:
            state = state_from_dual(top.solution, top.problem, config.feas_tol)
        except RayNotVerifiable as exc:
            notes["state_error"] = exc.message
    outcome = SearchOutcome(
        Verdict.SEPARATED,
        infeasible[-1].attempt.degree,
        _elapsed(started),
        state=state,
        pair=pair,
        attempts=attempts,
        epsilon=epsilon,
        notes=notes,
    )
    _log_outcome(outcome)
    return outcome


def _separate(
    target: MatrixPoly,
    presentation: ModulePresentation,
    infeasible: Sequence[_DegreeResult],
    cfg: CertifierConfig,
) -> tuple[SeparatingState | None, PointVectorPair | None, dict[str, Any]]:
    """Try optimal lower-bound states (highest degree first), then the ray state."""
    notes: dict[str, Any] = {}
    for res in reversed(infeasible):
        d = res.attempt.degree
        try:
            lb = lower_bound(target, presentation, d, cfg, certify=False)
        except CertifierError as exc:
            notes[f"lower_bound_{d}"] = exc.message
            continue
        if lb.state is None:
            continue
        found = extract_point(lb.state, cfg.extract_tol, cfg.rank_one_ratio)
        if isinstance(found, PointVectorPair):
            report = verify_point(found, target, presentation, POINT_EPS)
            if report.passed:
                notes["state_source"] = "lower_bound"
                notes["lower_bound"] = lb.bound
                return lb.state, found, notes
            notes[f"point_{d}"] = "extracted point failed verification"
        else:
            notes[f"point_{d}"] = found.reason
    top = infeasible[-1]
    assert top.problem is not None and top.solution is not None
    try:
        state = state_from_dual(top.solution, top.problem, cfg.feas_tol)
    except RayNotVerifiable as exc:
        notes["state_error"] = exc.message
        return None, None, notes
    notes["state_source"] = "dual_ray"
    found = extract_point(state, cfg.extract_tol, cfg.rank_one_ratio)
    pair = found if isinstance(found, PointVectorPair) else None
    if isinstance(found, NotExtractable):
        notes["extraction"] = found.reason
    return state, pair, notes


def _elapsed(started: float) -> float:
    return round((time.perf_counter() - started) * 1000.0, 3)


def _log_outcome(outcome: SearchOutcome) -> None:
    log_event(
        logger,
        "certify.outcome",
        verdict=outcome.verdict.value,
        degree=outcome.degree,
        elapsed_ms=outcome.elapsed_ms,
        attempts=len(outcome.attempts),
    )


# =============================================================================
# LOWER BOUND
# =============================================================================


def lower_bound(
    f: MatrixPoly,
    presentation: ModulePresentation,
    d: int,
    config: CertifierConfig = DEFAULT_CONFIG,
    *,
    certify: bool = True,
) -> LowerBound:
    """Largest lambda with f - lambda I in the degree-d module, with its optimal state."""
    problem = build_membership_sdp(f, presentation, d, lower_bound=True)
    sol = solve_feasibility(problem.instance, config.sdp_options)
    if sol.status is not SdpStatus.FEASIBLE:
        return LowerBound(sol.status, d, None)
    bound = float(sol.free[-1]) * problem.scale
    try:
        state = state_from_dual(sol, problem, config.feas_tol)
    except RayNotVerifiable:
        state = None
    cert = None
    if certify:
        cert = _bound_certificate(f, bound, sol, problem, config)
    return LowerBound(sol.status, d, bound, state, cert)


def _bound_certificate(
    f: MatrixPoly, bound: float, sol: SdpSolution, problem: GramProblem, cfg: CertifierConfig
) -> MembershipCertificate | None:
    shifted = f - MatrixPoly.identity(f.n, f.t).scale(bound)
    numeric_problem = replace(problem, target=shifted, lower_bound=False)
    try:
        cert = certificate_from_solution(sol, numeric_problem, cfg.sdp_options)
    except IndefiniteBlock:
        return None
    if not cfg.exact:
        return cert
    slack = 10.0 * cfg.feas_tol * problem.scale
    rational_bound = Fraction(bound - slack).limit_denominator(cfg.max_denominator)
    exact_target = f.to_fraction() - MatrixPoly.identity(f.n, f.t).scale(rational_bound)
    try:
        return rationalize(replace(cert, target=exact_target), cfg.max_denominator, cfg.feas_tol)
    except RationalizationFailed:
        return cert


# =============================================================================
# NOWHERE NEGATIVE SEMIDEFINITE
# =============================================================================


def find_nnsd_certificate(
    f: MatrixPoly,
    presentation: ModulePresentation,
    d_max: int | None = None,
    config: CertifierConfig = DEFAULT_CONFIG,
    *,
    assume_archimedean: bool = False,
) -> SearchOutcome:
    """Transformers p_i with sum p_i^T f p_i in I + M_G, via -I in M_{G + {-f}}."""
    started = time.perf_counter()
    if not f.is_symmetric():
        raise InputError("target matrix polynomial must be symmetric")
    if not assume_archimedean:
        witness = archimedean_witness(presentation, config.arch_n_max, config.arch_d_max, config)
        if isinstance(witness, ArchNotFound):
            warnings.warn(
                "no archimedean witness found; a failed search proves nothing",
                NotArchimedeanWarning,
                stacklevel=2,
            )
            log_event(logger, "certify.not_archimedean", logging.WARNING, tried=len(witness.tried))

    extended = presentation.with_generators([-f])
    minus_one = -MatrixPoly.identity(f.n, f.t)
    d_min = _start_degree(f)
    if d_max is None and config.dmax is None:
        d_max = d_min + config.extra_degrees
    inner = find_membership(minus_one, extended, d_max, config, d_min=d_min, extract=False)
    notes = dict(inner.notes)

    if inner.verdict is Verdict.FOUND and inner.certificate is not None:
        raw = inner.certificate
        f_index = len(presentation.generators) + 1
        transformers = tuple(
            fac for block in raw.blocks if block.generator_index == f_index for fac in block.factors
        )
        rearranged = _rearrange(raw, f, presentation, f_index, config)
        outcome = replace(
            inner,
            transformers=transformers,
            rearranged=rearranged,
            elapsed_ms=_elapsed(started),
            notes={**notes, "rearranged_verified": bool(rearranged.residual and rearranged.residual.passed)},
        )
        _log_outcome(outcome)
        return outcome

    if inner.verdict is Verdict.SEPARATED and inner.state is not None:
        found = extract_point(inner.state, config.extract_tol, config.rank_one_ratio)
        if isinstance(found, PointVectorPair):
            x = list(found.x)
            top = float(sym_eigen(f.evaluate(x))[0][-1])
            region = verify_point(found, MatrixPoly.zeros(f.n, f.t), presentation, POINT_EPS)
            if top <= POINT_EPS and region.in_region:
                outcome = replace(
                    inner,
                    elapsed_ms=_elapsed(started),
                    pair=found,
                    notes={**notes, "max_eigenvalue": top},
                )
                _log_outcome(outcome)
                return outcome
            notes["extraction"] = "extracted point is not a negative semidefinite point of S_G"
        else:
            notes["extraction"] = found.reason

    outcome = SearchOutcome(
        Verdict.EXHAUSTED,
        inner.degree,
        _elapsed(started),
        state=inner.state,
        attempts=inner.attempts,
        notes=notes,
    )
    _log_outcome(outcome)
    return outcome


def _rearrange(
    raw: MembershipCertificate,
    f: MatrixPoly,
    presentation: ModulePresentation,
    f_index: int,
    cfg: CertifierConfig,
) -> MembershipCertificate:
    """Move the -f terms across: sum w p^T f p - I as a certificate over M_G."""
    transformed = MatrixPoly.zeros(f.n, f.t)
    exact_f = f.to_fraction() if raw.exact else f
    for block in raw.blocks:
        if block.generator_index != f_index:
            continue
        for fac in block.factors:
            transformed = transformed + congruence(fac.p, exact_f).scale(fac.weight)
    target = transformed - MatrixPoly.identity(f.n, f.t)
    blocks = tuple(b for b in raw.blocks if b.generator_index != f_index)
    cert = MembershipCertificate(
        target=target,
        presentation=presentation,
        degree=raw.degree,
        blocks=blocks,
        multipliers=raw.multipliers,
        exact=raw.exact,
    )
    report = verify_certificate(cert, "exact" if raw.exact else "numeric", cfg.feas_tol)
    return replace(cert, residual=report)


def constant_nnsd_witness(a: Sequence[Sequence[object]]) -> ConstantWitness:
    """Exact B_i with sum weight * B_i^T A B_i = I for a constant symmetric A."""
    am = [[_frac(v) for v in row] for row in a]
    t = len(am)
    if t == 0 or any(len(row) != t for row in am):
        raise InputError("expected a nonempty square matrix")

    def quad(u: Sequence[Fraction]) -> Fraction:
        return sum((u[i] * am[i][j] * u[j] for i in range(t) for j in range(t)), Fraction(0))

    candidates: list[list[Fraction]] = []
    for i in range(t):
        candidates.append([Fraction(int(k == i)) for k in range(t)])
    for i in range(t):
        for j in range(i + 1, t):
            for sign in (1, -1):
                candidates.append([Fraction(int(k == i)) + sign * Fraction(int(k == j)) for k in range(t)])
    w, vecs = sym_eigen(np.array([[float(v) for v in row] for row in am]))
    if w[-1] <= 0:
        raise NegativeSemidefiniteInput("matrix has no positive eigenvalue", max_eigenvalue=float(w[-1]))
    for den in (2**10, 2**20, 2**40):
        candidates.append([Fraction(float(c)).limit_denominator(den) for c in vecs[:, -1]])

    for u in candidates:
        value = quad(u)
        if value > 0:
            weight = 1 / value
            mats = tuple(
                tuple(tuple(u[r] if c == i else Fraction(0) for c in range(t)) for r in range(t))
                for i in range(t)
            )
            return ConstantWitness(weight, tuple(u), mats)
    raise NegativeSemidefiniteInput("no rational direction with positive value found")


# =============================================================================
# ARCHIMEDEAN WITNESS
# =============================================================================


def archimedean_witness(
    presentation: ModulePresentation,
    n_max: int = 64,
    d_max: int = 2,
    config: CertifierConfig = DEFAULT_CONFIG,
) -> ArchWitness | ArchNotFound:
    """First N in 1, 2, 4, ... with N - sum X_i^2 in the module."""
    n, t = presentation.n, presentation.t
    sq = ScalarPoly.zero(n)
    for i in range(n):
        sq = sq + ScalarPoly.variable(n, i) ** 2
    tried: list[tuple[int, int]] = []
    bound = 1
    while bound <= n_max:
        target = MatrixPoly.scalar_identity(ScalarPoly.constant(n, bound) - sq, t)
        for d in range(1, d_max + 1):
            tried.append((bound, d))
            res = _attempt(target, presentation, d, config)
            if res.certificate is not None:
                return ArchWitness(bound, d, res.certificate)
        bound *= 2
    return ArchNotFound(tuple(tried))


# =============================================================================
# SCALAR MODULES
# =============================================================================


def product_module(gens: Sequence[ScalarPoly]) -> list[ScalarPoly]:
    """The 2^m - 1 nontrivial products, ordered by subset size then indices."""
    m = len(gens)
    if m > PRODUCT_MODULE_LIMIT:
        raise ProductModuleTooLarge(f"{m} generators exceed the limit of {PRODUCT_MODULE_LIMIT}", m=m)
    out: list[ScalarPoly] = []
    for size in range(1, m + 1):
        for subset in combinations(range(m), size):
            prod = gens[subset[0]]
            for idx in subset[1:]:
                prod = prod * gens[idx]
            out.append(prod)
    return out


def trace_reduce(cert: MembershipCertificate) -> MembershipCertificate:
    """Scalar certificate for tr(f)/t from a certificate over generators g * I."""
    pres = cert.presentation
    scalars = pres.scalar_generators()
    if scalars is None or any(b.spec.kind is not BlockKind.SCALAR for b in cert.blocks):
        raise NonScalarGenerator("trace reduction needs every generator to be g * I")
    n, t = pres.n, pres.t
    inv_t = Fraction(1, t) if cert.exact else 1.0 / t
    scalar_pres = ModulePresentation.scalar(n, 1, scalars, pres.equalities)

    blocks = []
    for block in cert.blocks:
        spec = block.spec
        mu = len(spec.basis)
        gram = [
            [inv_t * sum((block.gram[a * t + k][b * t + k] for k in range(t)), 0 * inv_t) for b in range(mu)]
            for a in range(mu)
        ]
        scalar_spec = BlockSpec(
            spec.generator_index,
            BlockKind.SCALAR,
            None,
            spec.basis,
            spec.weight,
            spec.weight,
        )
        factors = tuple(
            WeightedFactor(fac.weight * inv_t, MatrixPoly.from_scalar(entry))
            for fac in block.factors
            for _, _, entry in fac.p.iter_entries()
            if not entry.is_zero
        )
        blocks.append(CertificateBlock(scalar_spec, gram, factors))
    multipliers = tuple(
        EqualityMultiplier(m.equality_index, m.h, MatrixPoly.from_scalar(m.multiplier.trace().scale(inv_t)))
        for m in cert.multipliers
    )
    target = MatrixPoly.from_scalar(cert.target.trace().scale(inv_t))
    reduced = MembershipCertificate(
        target=target,
        presentation=scalar_pres,
        degree=cert.degree,
        blocks=tuple(blocks),
        multipliers=multipliers,
        exact=cert.exact,
    )
    report = verify_certificate(reduced, "exact" if cert.exact else "numeric")
    return replace(reduced, residual=report)


# =============================================================================
# REAL EIGENVALUES
# =============================================================================


def char_poly(f: MatrixPoly) -> CharPolyResult:
    """det(Y I - f) in variables (X, Y) by Faddeev-LeVerrier, checked by Cayley-Hamilton."""
    exact = f.to_fraction()
    n, t = exact.n, exact.t
    ident = MatrixPoly.identity(n, t)
    coeffs: dict[int, ScalarPoly] = {t: ScalarPoly.constant(n, 1)}
    m_prev = MatrixPoly.zeros(n, t)
    for k in range(1, t + 1):
        m_k = mul(exact, m_prev) + ident.scale(coeffs[t - k + 1])
        coeffs[t - k] = -(mul(exact, m_k).trace().scale(Fraction(1, k)))
        m_prev = m_k
    terms: dict[tuple[int, ...], Fraction] = {}
    for power, c in coeffs.items():
        for mono, v in c.terms.items():
            terms[mono + (power,)] = to_fraction(v)
    q = ScalarPoly(n + 1, terms)
    verified = substitute_matrix(q, exact).is_zero
    return CharPolyResult(q, "characteristic", verified)


def sampled_real_eigenvalues(f: MatrixPoly, points: Iterable[Sequence[float]]) -> list[list[float]]:
    """Real roots of the characteristic polynomial at each point."""
    q = char_poly(f).q
    n, t = f.n, f.t
    by_power: list[dict[tuple[int, ...], object]] = [{} for _ in range(t + 1)]
    for mono, c in q.terms.items():
        by_power[mono[-1]][mono[:-1]] = c
    coefficient_polys = [ScalarPoly(n, by_power[k]) for k in range(t, -1, -1)]
    pts = np.asarray(list(points), dtype=float).reshape(-1, n)
    values = np.stack([p.evaluate_many(pts) for p in coefficient_polys], axis=1)
    out = []
    for row in values:
        roots = np.roots(row)
        out.append(sorted(float(r.real) for r in roots if abs(r.imag) <= 1e-9 * (1 + abs(r))))
    return out


def real_eigenvalue_certificate(
    f: MatrixPoly,
    gens: Sequence[ScalarPoly],
    d_max: int | None = None,
    config: CertifierConfig = DEFAULT_CONFIG,
    *,
    assume_archimedean: bool = False,
) -> SearchOutcome:
    """Y in Q_{G, +-q_f}; on success substitute Y -> f and re-verify exactly."""
    started = time.perf_counter()
    n = f.n
    if not assume_archimedean:
        witness = archimedean_witness(
            ModulePresentation.scalar(n, 1, gens), config.arch_n_max, config.arch_d_max, config
        )
        if isinstance(witness, ArchNotFound):
            warnings.warn(
                "no archimedean witness found for the scalar module",
                NotArchimedeanWarning,
                stacklevel=2,
            )
    cp = char_poly(f)
    lifted = [g.extend(n + 1) for g in gens]
    pres = ModulePresentation.scalar(n + 1, 1, lifted, (cp.q,))
    y = MatrixPoly.from_scalar(ScalarPoly.variable(n + 1, n))
    inner = find_membership(y, pres, d_max, config)
    notes = {**inner.notes, "char_poly": repr(cp.q), "cayley_hamilton": cp.verified}
    if inner.verdict is not Verdict.FOUND or inner.certificate is None:
        return replace(inner, elapsed_ms=_elapsed(started), notes=notes)

    cert = inner.certificate
    exact_f = f.to_fraction() if cert.exact else f
    total = MatrixPoly.zeros(n, f.t)
    for block in cert.blocks:
        g = ScalarPoly.constant(n, 1) if block.generator_index == 0 else gens[block.generator_index - 1]
        for fac in block.factors:
            h = substitute_matrix(fac.p[0, 0], exact_f)
            total = total + mul(h, h).scale(g).scale(fac.weight)
    residual = exact_f - total
    if cert.exact and not residual.is_zero:
        raise SubstitutionMismatch(
            "substituting Y -> f into the exact identity does not reproduce f",
            max_deviation=residual.max_abs_coefficient(),
        )
    outcome = replace(
        inner,
        elapsed_ms=_elapsed(started),
        substitution_residual=residual,
        notes={**notes, "substitution_exact": cert.exact},
    )
    _log_outcome(outcome)
    return outcome
