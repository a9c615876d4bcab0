"""Factorization f = g^T g of univariate matrix polynomials PSD on the line.

The identity Gram block at degree deg(f)/2 is exactly feasible for such f;
its PSD factor gives g row by row.  When rationalization succeeds the exact
form is f = sum_r w_r * g_r^T g_r with rational weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .config import DEFAULT_CONFIG, CertifierConfig
from .errors import (
    DimensionMismatch,
    IndefiniteBlock,
    InputError,
    NotPsdOnLine,
    RationalizationFailed,
    RayNotVerifiable,
)
from .gram import (
    CertificateBlock,
    MembershipCertificate,
    ModulePresentation,
    build_membership_sdp,
    certificate_from_solution,
    poly_scale,
    rationalize,
)
from .numla import psd_factor
from .observability import get_logger, log_event
from .polycore import Coeff, MatrixPoly, ScalarPoly, mul
from .sdp import SdpStatus, solve_feasibility
from .states import PointVectorPair, extract_point, state_from_dual

logger = get_logger(__name__)

SCAN_POINTS = 257
FAR_DOUBLINGS = 12


@dataclass(frozen=True, eq=False)
class JakubovicFactorization:
    g: MatrixPoly
    residual: float
    exact_rows: MatrixPoly | None = None
    exact_weights: tuple[Fraction, ...] = ()
    certificate: MembershipCertificate | None = None

    @property
    def exact(self) -> bool:
        return self.exact_rows is not None


def _radius(f: MatrixPoly) -> float:
    """Cauchy-style bound beyond which the leading coefficients dominate."""
    coeffs = f.coefficient_matrices()
    deg = f.degree
    lead = float(np.max(np.abs(coeffs[(deg,)]))) if deg >= 0 else 1.0
    rest = max((float(np.max(np.abs(c))) for m, c in coeffs.items() if m != (deg,)), default=0.0)
    return 1.0 + rest / max(lead, 1e-300)


def _scan(f: MatrixPoly) -> tuple[float, float]:
    """(point, min eigenvalue) of the worst sample on Chebyshev nodes and far out."""
    r = _radius(f)
    k = np.arange(SCAN_POINTS)
    nodes = r * np.cos(np.pi * (2 * k + 1) / (2 * SCAN_POINTS))
    far = np.array([s * r * 2.0**j for j in range(1, FAR_DOUBLINGS) for s in (-1.0, 1.0)])
    pts = np.concatenate([nodes, far, [0.0]])
    values = f.evaluate_many(pts.reshape(-1, 1))
    mins = np.linalg.eigvalsh(0.5 * (values + np.transpose(values, (0, 2, 1))))[:, 0]
    scaled = mins / np.maximum(1.0, np.abs(pts) ** max(f.degree, 0))
    worst = int(np.argmin(scaled))
    return float(pts[worst]), float(mins[worst])


def check_psd_on_line(f: MatrixPoly, tol: float = 1e-8) -> None:
    """Raise NotPsdOnLine with a witness when f is visibly not PSD on the line."""
    scale = poly_scale(f)
    deg = f.degree
    if deg < 0:
        return
    if deg % 2 == 1:
        z, lam = _scan(f)
        raise NotPsdOnLine(f"degree {deg} is odd", witness=z, min_eigenvalue=lam)
    lead = f.coefficient_matrices()[(deg,)]
    lead_min = float(np.linalg.eigvalsh(0.5 * (lead + lead.T))[0])
    if lead_min < -tol * scale:
        z, lam = _scan(f)
        raise NotPsdOnLine("leading coefficient matrix is not PSD", witness=z, min_eigenvalue=lam)
    z, lam = _scan(f)
    if lam < -tol * scale:
        raise NotPsdOnLine(f"negative eigenvalue at z={z:.6g}", witness=z, min_eigenvalue=lam)


def _rows_from_vectors(vectors: list[list[Coeff]], t: int, mu: int) -> MatrixPoly:
    """Row r of g has entries sum_a B[r, a*t + k] Z^a."""
    if not vectors:
        return MatrixPoly.zeros(1, 1, t)
    rows = []
    for vec in vectors:
        rows.append(
            [ScalarPoly(1, {(a,): vec[a * t + k] for a in range(mu) if vec[a * t + k] != 0}) for k in range(t)]
        )
    return MatrixPoly(rows, 1)


def _exact_rows(block: CertificateBlock, t: int, mu: int) -> tuple[MatrixPoly, tuple[Fraction, ...]]:
    """Rows and weights from the LDL factors of a rational identity block."""
    rows: list[list[ScalarPoly]] = []
    weights: list[Fraction] = []
    for fac in block.factors:
        for r in range(fac.p.rows):
            row = [fac.p[r, k] for k in range(t)]
            if all(p.is_zero for p in row):
                continue
            rows.append(row)
            weights.append(Fraction(fac.weight))
    if not rows:
        return MatrixPoly.zeros(1, 1, t), (Fraction(0),)
    return MatrixPoly(rows, 1), tuple(weights)


def jakubovic_factor(
    f: MatrixPoly, config: CertifierConfig = DEFAULT_CONFIG, *, pretest: bool = True
) -> JakubovicFactorization:
    """g with at most t * (deg f / 2 + 1) rows and f close to g^T g."""
    if f.n != 1:
        raise DimensionMismatch(f"expected a univariate matrix polynomial, got {f.n} variables")
    if not f.is_symmetric():
        raise InputError("matrix polynomial must be symmetric")
    tol = config.feas_tol
    t = f.t
    if pretest:
        check_psd_on_line(f, tol)
    d = max(f.degree, 0) // 2
    problem = build_membership_sdp(f, ModulePresentation(1, t), d)
    sol = solve_feasibility(problem.instance, config.sdp_options)
    if sol.status is not SdpStatus.FEASIBLE:
        z, lam = _scan(f)
        if sol.status is SdpStatus.INFEASIBLE:
            try:
                state = state_from_dual(sol, problem, config.feas_tol)
            except RayNotVerifiable:
                state = None
            found = None if state is None else extract_point(state, config.extract_tol, config.rank_one_ratio)
            if isinstance(found, PointVectorPair):
                z_state = found.x[0]
                lam_state = float(np.linalg.eigvalsh(f.evaluate([z_state]))[0])
                if lam_state < lam:
                    z, lam = z_state, lam_state
        raise NotPsdOnLine(f"Gram problem is {sol.status.value}", witness=z, min_eigenvalue=lam)

    try:
        cert = certificate_from_solution(sol, problem, config.sdp_options)
    except IndefiniteBlock as exc:
        raise NotPsdOnLine("Gram block is indefinite", witness=0.0, min_eigenvalue=float("nan")) from exc
    block = cert.blocks[0]
    mu = len(block.spec.basis)
    fac = psd_factor(block.gram_array(), tol)
    g = _rows_from_vectors([list(map(float, row)) for row in fac.factor], t, mu)
    residual = (f.to_float() - mul(g.adjoint(), g)).max_abs_coefficient()

    exact_rows = None
    weights: tuple[Fraction, ...] = ()
    final = cert
    if config.exact:
        try:
            final = rationalize(cert, config.max_denominator, tol)
        except RationalizationFailed as exc:
            log_event(logger, "univar.rationalize_failed", reason=exc.message)
        else:
            exact_rows, weights = _exact_rows(final.blocks[0], t, mu)
    log_event(
        logger,
        "univar.factored",
        degree=f.degree,
        t=t,
        rows=g.rows,
        residual=residual,
        exact=exact_rows is not None,
    )
    return JakubovicFactorization(g, residual, exact_rows, weights, final)


def exact_residual(f: MatrixPoly, result: JakubovicFactorization) -> MatrixPoly:
    """f - sum_r w_r g_r^T g_r in rational arithmetic."""
    if result.exact_rows is None:
        raise InputError("factorization has no exact form")
    total = MatrixPoly.zeros(1, f.t)
    rows = result.exact_rows
    for r, w in enumerate(result.exact_weights):
        row = rows.submatrix([r], range(f.t))
        total = total + mul(row.adjoint(), row).scale(w)
    return f.to_fraction() - total


def evaluation_error(f: MatrixPoly, g: MatrixPoly, points: np.ndarray) -> float:
    """max over z of ||f(z) - g(z)^T g(z)|| / (1 + |z|^deg f)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 1)
    fv = f.evaluate_many(pts)
    gv = g.evaluate_many(pts)
    diff = fv - np.einsum("pri,prj->pij", gv, gv)
    norms = np.linalg.norm(diff, axis=(1, 2))
    weight = 1.0 + np.abs(pts[:, 0]) ** max(f.degree, 0)
    return float(np.max(norms / weight)) if norms.size else 0.0


def max_rows(f: MatrixPoly) -> int:
    return f.t * (math.floor(max(f.degree, 0) / 2) + 1)
