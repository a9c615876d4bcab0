"""Gram-matrix reduction of quadratic-module membership to SDP feasibility.

A target f is searched as

    f = sum over blocks of (basis)^T Q_b (basis) weighted by the generator
        + sum over equalities h of h * S_h

with every Q_b positive semidefinite and S_h free symmetric.  Block 0 always
belongs to the implicit identity generator.  One affine constraint is emitted
per (monomial, matrix position k <= l) touched by any block or by f.

Block kinds:
    scalar    g = s * I_t, Gram size t * |basis|, index a * t + k
    diagonal  one scalar-like block per nonzero diagonal entry g_rr
    full      any other g, Gram size t^2 * |basis|, index (l * |basis| + a) * t + r
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Any, TypeAlias

import numpy as np

from .config import SdpOptions
from .errors import (
    CertifierError,
    DegreeTooSmall,
    DimensionMismatch,
    IndefiniteBlock,
    IndefiniteInput,
    InputError,
    RationalizationFailed,
)
from .numla import exact_ldlt, min_eigenvalue, psd_factor
from .observability import get_logger, log_event
from .polycore import (
    Coeff,
    MatrixPoly,
    Monomial,
    ScalarPoly,
    add_monomials,
    congruence,
    grlex_key,
    monomials_up_to,
    to_fraction,
)
from .sdp import SdpInstance, SdpSolution, SdpStatus

logger = get_logger(__name__)

Key: TypeAlias = tuple[Monomial, int, int]
GramMatrix: TypeAlias = list[list[Coeff]]

VERIFY_FACTOR = 10.0


def key_order(key: Key) -> tuple[tuple[int, tuple[int, ...]], int, int]:
    mono, k, l = key  # noqa: E741
    return grlex_key(mono), k, l


def poly_scale(f: MatrixPoly) -> float:
    """Largest coefficient magnitude; 1 for the zero matrix."""
    return f.max_abs_coefficient() or 1.0


# =============================================================================
# PRESENTATION
# =============================================================================


@dataclass(frozen=True)
class ModulePresentation:
    """Generators G of a quadratic module in ``n`` variables on t x t matrices.

    ``equalities`` are scalars h entering as h * I_t with a free symmetric
    multiplier; they model ideal constraints h = 0.
    """

    n: int
    t: int
    generators: tuple[MatrixPoly, ...] = ()
    equalities: tuple[ScalarPoly, ...] = ()

    def __post_init__(self) -> None:
        if self.n < 0 or self.t < 1:
            raise InputError(f"invalid presentation shape n={self.n}, t={self.t}")
        for i, g in enumerate(self.generators):
            if g.n != self.n or g.shape != (self.t, self.t):
                raise DimensionMismatch(
                    f"generator {i} is {g.rows}x{g.cols} in {g.n} variables, "
                    f"expected {self.t}x{self.t} in {self.n}"
                )
            if not g.is_symmetric():
                raise InputError(f"generator {i} is not symmetric")
        for i, h in enumerate(self.equalities):
            if h.n != self.n:
                raise DimensionMismatch(f"equality {i} has {h.n} variables, expected {self.n}")

    @classmethod
    def scalar(
        cls, n: int, t: int, gens: Iterable[ScalarPoly], equalities: Iterable[ScalarPoly] = ()
    ) -> ModulePresentation:
        """Presentation with every generator of the form g * I_t."""
        return cls(
            n,
            t,
            tuple(MatrixPoly.scalar_identity(g, t) for g in gens),
            tuple(equalities),
        )

    def with_generators(self, extra: Iterable[MatrixPoly]) -> ModulePresentation:
        return replace(self, generators=self.generators + tuple(extra))

    def scalar_generators(self) -> list[ScalarPoly] | None:
        out = []
        for g in self.generators:
            s = g.scalar_part()
            if s is None:
                return None
            out.append(s)
        return out


# =============================================================================
# BLOCKS
# =============================================================================


class BlockKind(str, Enum):
    SCALAR = "scalar"
    DIAGONAL = "diagonal"
    FULL = "full"


@dataclass(frozen=True)
class BlockSpec:
    """Layout of one Gram block.

    ``generator_index`` 0 is the implicit identity; i + 1 is generators[i].
    ``weight`` is the 1x1 scalar (scalar, diagonal kinds) or the full t x t
    generator; ``generator`` is always the t x t generator matrix.
    """

    generator_index: int
    kind: BlockKind
    component: int | None
    basis: tuple[Monomial, ...]
    weight: MatrixPoly
    generator: MatrixPoly

    @property
    def t(self) -> int:
        return self.generator.t

    @property
    def inner(self) -> int:
        return self.weight.rows

    @property
    def size(self) -> int:
        return self.t * self.inner * len(self.basis)

    def elements(self) -> list[tuple[int, int, int]]:
        """(output column, basis position, inner row) per Gram index."""
        t, mu = self.t, len(self.basis)
        if self.kind is BlockKind.FULL:
            return [(l, a, r) for l in range(t) for a in range(mu) for r in range(t)]  # noqa: E741
        return [(k, a, 0) for a in range(mu) for k in range(t)]

    def factor_matrix(self, vec: Sequence[Coeff]) -> MatrixPoly:
        """t x t matrix p whose congruence p^T g p equals the rank-one term of ``vec``."""
        t, n = self.t, self.generator.n
        grid: list[list[dict[Monomial, Coeff]]] = [[{} for _ in range(t)] for _ in range(t)]
        for idx, (c, a, r) in enumerate(self.elements()):
            value = vec[idx]
            if value == 0:
                continue
            row = r if self.kind is BlockKind.FULL else (self.component or 0)
            cell = grid[row][c]
            mono = self.basis[a]
            cell[mono] = cell.get(mono, 0) + value
        return MatrixPoly([[ScalarPoly(n, cell) for cell in row] for row in grid], n)


def _block_degree(d: int, weight_degree: int) -> int:
    return max(d - math.ceil(max(weight_degree, 0) / 2), 0)


def plan_blocks(presentation: ModulePresentation, d: int) -> list[BlockSpec]:
    """Gram blocks for degree ``d``: identity first, generators in order."""
    n, t = presentation.n, presentation.t
    one = ScalarPoly.constant(n, 1)
    specs = [
        BlockSpec(
            0,
            BlockKind.SCALAR,
            None,
            tuple(monomials_up_to(n, d)),
            MatrixPoly.from_scalar(one),
            MatrixPoly.identity(n, t),
        )
    ]
    for i, g in enumerate(presentation.generators, start=1):
        if g.is_zero:
            continue
        s = g.scalar_part()
        if s is not None:
            basis = tuple(monomials_up_to(n, _block_degree(d, s.degree)))
            specs.append(BlockSpec(i, BlockKind.SCALAR, None, basis, MatrixPoly.from_scalar(s), g))
        elif g.is_diagonal():
            for r, g_rr in enumerate(g.diagonal_entries()):
                if g_rr.is_zero:
                    continue
                basis = tuple(monomials_up_to(n, _block_degree(d, g_rr.degree)))
                specs.append(
                    BlockSpec(i, BlockKind.DIAGONAL, r, basis, MatrixPoly.from_scalar(g_rr), g)
                )
        else:
            basis = tuple(monomials_up_to(n, _block_degree(d, g.degree)))
            specs.append(BlockSpec(i, BlockKind.FULL, None, basis, g, g))
    return specs


@lru_cache(maxsize=256)
def block_layout(spec: BlockSpec) -> dict[Key, tuple[tuple[int, int, Coeff], ...]]:
    """Ordered index pairs (i, j) with weight coefficient feeding each key.

    The coefficient of ``key`` in the block's contribution is the sum of
    ``coef * Q[i, j]`` over the listed pairs.
    """
    elements = spec.elements()
    out: dict[Key, list[tuple[int, int, Coeff]]] = defaultdict(list)
    for i, (ci, ai, ri) in enumerate(elements):
        for j, (cj, aj, rj) in enumerate(elements):
            if ci > cj:
                continue
            w = spec.weight[ri, rj]
            if w.is_zero:
                continue
            base = add_monomials(spec.basis[ai], spec.basis[aj])
            for gamma, coef in w.terms.items():
                out[(add_monomials(base, gamma), ci, cj)].append((i, j, coef))
    return {key: tuple(pairs) for key, pairs in out.items()}


@dataclass(frozen=True)
class EqualitySpec:
    """Free symmetric multiplier S for equality h; columns (a, k, l), k <= l."""

    equality_index: int
    h: ScalarPoly
    basis: tuple[Monomial, ...]
    t: int

    def columns(self) -> list[tuple[int, int, int]]:
        return [
            (a, k, l)
            for a in range(len(self.basis))
            for k in range(self.t)
            for l in range(k, self.t)  # noqa: E741
        ]

    def layout(self) -> list[list[tuple[Key, Coeff]]]:
        return [
            [
                ((add_monomials(self.basis[a], gamma), k, l), coef)
                for gamma, coef in self.h.terms.items()
            ]
            for a, k, l in self.columns()  # noqa: E741
        ]

    def multiplier(self, values: Sequence[Coeff]) -> MatrixPoly:
        n = self.h.n
        grid: list[list[dict[Monomial, Coeff]]] = [[{} for _ in range(self.t)] for _ in range(self.t)]
        for (a, k, l), v in zip(self.columns(), values, strict=True):  # noqa: E741
            if v == 0:
                continue
            mono = self.basis[a]
            grid[k][l][mono] = grid[k][l].get(mono, 0) + v
            if k != l:
                grid[l][k][mono] = grid[l][k].get(mono, 0) + v
        return MatrixPoly([[ScalarPoly(n, c) for c in row] for row in grid], n)


def plan_equalities(presentation: ModulePresentation, d: int) -> list[EqualitySpec]:
    out = []
    for i, h in enumerate(presentation.equalities):
        if h.is_zero or h.degree > 2 * d:
            continue
        basis = tuple(monomials_up_to(presentation.n, 2 * d - h.degree))
        out.append(EqualitySpec(i, h, basis, presentation.t))
    return out


# =============================================================================
# SDP CONSTRUCTION
# =============================================================================


@dataclass(frozen=True, eq=False)
class GramProblem:
    """An SDP instance together with the layout needed to read it back."""

    target: MatrixPoly
    presentation: ModulePresentation
    degree: int
    blocks: tuple[BlockSpec, ...]
    equalities: tuple[EqualitySpec, ...]
    keys: tuple[Key, ...]
    scale: float
    instance: SdpInstance
    lower_bound: bool = False

    def key_index(self) -> dict[Key, int]:
        return {key: i for i, key in enumerate(self.keys)}


def target_coefficients(f: MatrixPoly) -> dict[Key, Coeff]:
    out: dict[Key, Coeff] = {}
    for k in range(f.t):
        for l in range(k, f.t):  # noqa: E741
            for mono, c in f[k, l].terms.items():
                out[(mono, k, l)] = c
    return out


def build_membership_sdp(
    f: MatrixPoly,
    presentation: ModulePresentation,
    d: int,
    *,
    lower_bound: bool = False,
) -> GramProblem:
    """Coefficient-matching SDP whose feasibility puts ``f`` in the degree-d module.

    With ``lower_bound`` a free variable lambda is added on the identity
    coefficients and maximized, i.e. f - lambda * I is searched instead.
    """
    if f.n != presentation.n or f.shape != (presentation.t, presentation.t):
        raise DimensionMismatch(
            f"target is {f.rows}x{f.cols} in {f.n} variables, presentation is "
            f"{presentation.t}x{presentation.t} in {presentation.n}"
        )
    if not f.is_symmetric():
        raise InputError("target matrix polynomial must be symmetric")
    if d < 0:
        raise InputError("degree must be nonnegative")

    blocks = plan_blocks(presentation, d)
    equalities = plan_equalities(presentation, d)
    layouts = [block_layout(spec) for spec in blocks]
    eq_layouts = [eq.layout() for eq in equalities]

    reachable: set[Key] = set()
    for layout in layouts:
        reachable.update(layout)
    for cols in eq_layouts:
        for col in cols:
            reachable.update(key for key, _ in col)
    fcoef = target_coefficients(f)
    missing = sorted(set(fcoef) - reachable, key=key_order)
    if missing:
        mono, k, l = missing[0]  # noqa: E741
        raise DegreeTooSmall(
            f"coefficient of monomial {list(mono)} at ({k}, {l}) is not reachable at degree {d}",
            degree=d,
            missing=len(missing),
        )

    keys = tuple(sorted(reachable, key=key_order))
    index = {key: i for i, key in enumerate(keys)}
    m = len(keys)
    scale = poly_scale(f)

    coeffs = []
    for spec, layout in zip(blocks, layouts, strict=True):
        arr = np.zeros((m, spec.size, spec.size))
        for key, pairs in layout.items():
            row = index[key]
            for i, j, coef in pairs:
                c = 0.5 * float(coef)
                arr[row, i, j] += c
                arr[row, j, i] += c
        coeffs.append(arr)

    free_cols: list[np.ndarray] = []
    for cols in eq_layouts:
        for col in cols:
            vec = np.zeros(m)
            for key, coef in col:
                vec[index[key]] += float(coef)
            free_cols.append(vec)
    free_objective: list[float] = [0.0] * len(free_cols)
    if lower_bound:
        vec = np.zeros(m)
        for k in range(f.t):
            vec[index[((0,) * f.n, k, k)]] = 1.0
        free_cols.append(vec)
        free_objective.append(-1.0)

    rhs = np.zeros(m)
    for key, c in fcoef.items():
        rhs[index[key]] = float(c) / scale

    instance = SdpInstance(
        block_dims=tuple(spec.size for spec in blocks),
        coefficients=tuple(coeffs),
        rhs=rhs,
        objective=(tuple(np.zeros((s.size, s.size)) for s in blocks) if lower_bound else None),
        free_columns=np.column_stack(free_cols) if free_cols else None,
        free_objective=np.array(free_objective) if lower_bound else None,
    )
    log_event(
        logger,
        "gram.built",
        degree=d,
        blocks=[spec.size for spec in blocks],
        constraints=m,
        free=len(free_cols),
        lower_bound=lower_bound,
    )
    return GramProblem(
        target=f,
        presentation=presentation,
        degree=d,
        blocks=tuple(blocks),
        equalities=tuple(equalities),
        keys=keys,
        scale=scale,
        instance=instance,
        lower_bound=lower_bound,
    )


# =============================================================================
# CERTIFICATES
# =============================================================================


@dataclass(frozen=True)
class WeightedFactor:
    """Term ``weight * p^T g p`` of a certificate block."""

    weight: Coeff
    p: MatrixPoly


@dataclass(frozen=True, eq=False)
class CertificateBlock:
    spec: BlockSpec
    gram: GramMatrix
    factors: tuple[WeightedFactor, ...] = ()

    @property
    def generator_index(self) -> int:
        return self.spec.generator_index

    def gram_array(self) -> np.ndarray:
        size = len(self.gram)
        return np.array([[float(v) for v in row] for row in self.gram], dtype=float).reshape(size, size)

    @property
    def is_exact(self) -> bool:
        return all(isinstance(v, Fraction) for row in self.gram for v in row) and all(
            isinstance(fac.weight, Fraction) and fac.p.is_exact for fac in self.factors
        )


@dataclass(frozen=True)
class EqualityMultiplier:
    equality_index: int
    h: ScalarPoly
    multiplier: MatrixPoly


@dataclass(frozen=True)
class ResidualReport:
    """Outcome of verification; ``residual`` is exact in exact mode."""

    mode: str
    passed: bool
    max_deviation: float
    min_gram_eigenvalue: float
    residual: MatrixPoly | None = None
    message: str = ""


@dataclass(frozen=True, eq=False)
class MembershipCertificate:
    target: MatrixPoly
    presentation: ModulePresentation
    degree: int
    blocks: tuple[CertificateBlock, ...]
    multipliers: tuple[EqualityMultiplier, ...] = ()
    exact: bool = False
    residual: ResidualReport | None = None
    notes: dict[str, Any] = field(default_factory=dict)

    def reconstruct(self) -> MatrixPoly:
        """Sum of all weighted congruences plus equality terms."""
        return reconstruct(self)


def _gram_contribution(spec: BlockSpec, gram: GramMatrix) -> dict[Key, Coeff]:
    out: dict[Key, Coeff] = {}
    for key, pairs in block_layout(spec).items():
        total: Coeff = Fraction(0)
        for i, j, coef in pairs:
            q = gram[i][j]
            if q != 0:
                total = total + coef * q
        if total != 0:
            out[key] = total
    return out


def _keys_to_matrix(values: dict[Key, Coeff], n: int, t: int) -> MatrixPoly:
    grid: list[list[dict[Monomial, Coeff]]] = [[{} for _ in range(t)] for _ in range(t)]
    for (mono, k, l), v in values.items():  # noqa: E741
        grid[k][l][mono] = v
        if k != l:
            grid[l][k][mono] = v
    return MatrixPoly([[ScalarPoly(n, c) for c in row] for row in grid], n)


def _accumulate(acc: dict[Key, Coeff], other: dict[Key, Coeff], sign: int = 1) -> None:
    for key, v in other.items():
        s = acc.get(key, 0) + sign * v
        if s == 0:
            acc.pop(key, None)
        else:
            acc[key] = s


def _multiplier_contribution(mult: EqualityMultiplier) -> dict[Key, Coeff]:
    return target_coefficients(mult.multiplier.scale(mult.h))


def gram_residual(cert: MembershipCertificate) -> dict[Key, Coeff]:
    """f minus the Gram-block and equality contributions, key by key."""
    acc: dict[Key, Coeff] = dict(target_coefficients(cert.target))
    for block in cert.blocks:
        if block.gram:
            _accumulate(acc, _gram_contribution(block.spec, block.gram), -1)
        else:
            _accumulate(acc, target_coefficients(_factor_sum(block)), -1)
    for mult in cert.multipliers:
        _accumulate(acc, _multiplier_contribution(mult), -1)
    return acc


def _factor_sum(block: CertificateBlock) -> MatrixPoly:
    g = block.spec.generator
    total = MatrixPoly.zeros(g.n, g.t)
    for fac in block.factors:
        total = total + congruence(fac.p, g).scale(fac.weight)
    return total


def reconstruct(cert: MembershipCertificate) -> MatrixPoly:
    """Factor form where a block has factors, Gram form otherwise."""
    n, t = cert.presentation.n, cert.presentation.t
    total = MatrixPoly.zeros(n, t)
    for block in cert.blocks:
        if block.factors:
            total = total + _factor_sum(block)
        elif block.gram:
            total = total + _keys_to_matrix(_gram_contribution(block.spec, block.gram), n, t)
    for mult in cert.multipliers:
        total = total + mult.multiplier.scale(mult.h)
    return total


def _pack_factors(spec: BlockSpec, vectors: Sequence[Sequence[Coeff]], weights: Sequence[Coeff]) -> list[WeightedFactor]:
    """One factor per vector; scalar blocks pack up to t equal-weight vectors."""
    out: list[WeightedFactor] = []
    if spec.kind is not BlockKind.SCALAR:
        return [WeightedFactor(w, spec.factor_matrix(v)) for v, w in zip(vectors, weights, strict=True)]
    t = spec.t
    i = 0
    while i < len(vectors):
        j = i
        while j < len(vectors) and j - i < t and weights[j] == weights[i]:
            j += 1
        rows = [spec.factor_matrix(v) for v in vectors[i:j]]
        # each factor_matrix puts its vector in row 0; stack them into rows 0..j-i-1
        stacked = [list(rows[r].entries[0]) for r in range(len(rows))]
        zero = [ScalarPoly.zero(spec.generator.n)] * t
        stacked += [zero] * (t - len(stacked))
        out.append(WeightedFactor(weights[i], MatrixPoly(stacked, spec.generator.n)))
        i = j
    return out


def certificate_from_solution(
    sol: SdpSolution, problem: GramProblem, opts: SdpOptions | None = None
) -> MembershipCertificate:
    """Numeric certificate from a Feasible solution; Gram blocks are factored."""
    opts = opts or SdpOptions()
    if sol.status is not SdpStatus.FEASIBLE:
        raise InputError(f"solution status is {sol.status.value}, expected Feasible")
    blocks = []
    for spec, x in zip(problem.blocks, sol.primal, strict=True):
        gram = 0.5 * (x + x.T) * problem.scale
        try:
            fac = psd_factor(gram, opts.feas_tol)
        except IndefiniteInput as exc:
            raise IndefiniteBlock(
                f"Gram block of generator {spec.generator_index} is indefinite", **exc.details
            ) from exc
        vectors = [list(map(float, row)) for row in fac.factor]
        blocks.append(
            CertificateBlock(
                spec,
                [list(map(float, row)) for row in gram],
                tuple(_pack_factors(spec, vectors, [1.0] * len(vectors))),
            )
        )
    multipliers = []
    offset = 0
    for eq in problem.equalities:
        width = len(eq.columns())
        values = [float(v) * problem.scale for v in sol.free[offset : offset + width]]
        offset += width
        multipliers.append(EqualityMultiplier(eq.equality_index, eq.h, eq.multiplier(values)))
    cert = MembershipCertificate(
        target=problem.target,
        presentation=problem.presentation,
        degree=problem.degree,
        blocks=tuple(blocks),
        multipliers=tuple(multipliers),
        exact=False,
    )
    report = verify_certificate(cert, "numeric", opts.feas_tol)
    return replace(cert, residual=report)


# =============================================================================
# VERIFICATION
# =============================================================================


def verify_certificate(
    cert: MembershipCertificate, mode: str = "exact", feas_tol: float = 1e-8
) -> ResidualReport:
    """Check the identity and PSD-ness of every block; never raises."""
    try:
        if mode == "exact":
            return _verify_exact(cert)
        return _verify_numeric(cert, feas_tol)
    except CertifierError as exc:
        return ResidualReport(mode, False, float("inf"), float("nan"), message=exc.message)
    except (ArithmeticError, ValueError, TypeError) as exc:
        return ResidualReport(mode, False, float("inf"), float("nan"), message=str(exc))


def _verify_exact(cert: MembershipCertificate) -> ResidualReport:
    if not (all(b.is_exact for b in cert.blocks) and all(m.multiplier.is_exact for m in cert.multipliers)):
        return ResidualReport(
            "exact", False, float("inf"), float("nan"), message="certificate has float data"
        )
    n, t = cert.presentation.n, cert.presentation.t
    exact_target = replace(cert, target=cert.target.to_fraction())
    gap = gram_residual(exact_target)
    residual = _keys_to_matrix(gap, n, t)
    max_dev = max((abs(float(v)) for v in gap.values()), default=0.0)
    min_pivot = float("inf")
    psd = True
    for block in cert.blocks:
        ldl = exact_ldlt([[to_fraction(v) for v in row] for row in block.gram])
        psd = psd and ldl.psd
        if ldl.d:
            min_pivot = min(min_pivot, float(min(ldl.d)))
        if block.factors and any(fac.weight < 0 for fac in block.factors):
            psd = False
    factor_gap = 0.0
    if all(b.factors or not b.gram for b in cert.blocks):
        diff = cert.target.to_fraction() - reconstruct(cert)
        factor_gap = diff.max_abs_coefficient()
    passed = not gap and psd and factor_gap == 0.0
    message = "" if passed else (
        "residual is nonzero" if gap or factor_gap else "a Gram block is not PSD"
    )
    if min_pivot == float("inf"):
        min_pivot = 0.0
    return ResidualReport("exact", passed, max(max_dev, factor_gap), min_pivot, residual, message)


def _verify_numeric(cert: MembershipCertificate, feas_tol: float) -> ResidualReport:
    scale = poly_scale(cert.target)
    gap = gram_residual(cert)
    max_dev = max((abs(float(v)) for v in gap.values()), default=0.0)
    min_eig = min((min_eigenvalue(b.gram_array()) for b in cert.blocks), default=0.0)
    bound = VERIFY_FACTOR * feas_tol * scale
    passed = max_dev <= bound and min_eig >= -bound
    message = "" if passed else f"deviation {max_dev:.3e} or min eigenvalue {min_eig:.3e} exceeds {bound:.1e}"
    return ResidualReport(
        "numeric",
        passed,
        max_dev,
        min_eig,
        _keys_to_matrix(gap, cert.presentation.n, cert.presentation.t).to_float(),
        message,
    )


# =============================================================================
# RATIONALIZATION
# =============================================================================


def _round(value: Coeff, max_denominator: int) -> Fraction:
    return to_fraction(value).limit_denominator(max_denominator)


def _snap_gram(arr: np.ndarray, max_denominator: int) -> list[list[Fraction]]:
    """Entrywise rounding of the symmetrized block; near-zero faces become exactly zero."""
    sym = (arr + arr.T) / 2
    size = sym.shape[0]
    gram = [[Fraction(0)] * size for _ in range(size)]
    for i in range(size):
        for j in range(i, size):
            gram[i][j] = gram[j][i] = _round(float(sym[i, j]), max_denominator)
    return gram


def _exact_gram_from_rows(rows: list[list[Fraction]], size: int) -> list[list[Fraction]]:
    gram = [[Fraction(0)] * size for _ in range(size)]
    for row in rows:
        nz = [(i, v) for i, v in enumerate(row) if v != 0]
        for i, vi in nz:
            for j, vj in nz:
                gram[i][j] += vi * vj
    return gram


def _ldl_factors(gram: list[list[Fraction]]) -> tuple[bool, list[list[Fraction]], list[Fraction]]:
    ldl = exact_ldlt(gram)
    size = len(gram)
    vectors: list[list[Fraction]] = []
    weights: list[Fraction] = []
    for k, dk in enumerate(ldl.d):
        if dk == 0:
            continue
        vec = [Fraction(0)] * size
        for i in range(size):
            vec[ldl.perm[i]] = ldl.l[i][k]
        vectors.append(vec)
        weights.append(dk)
    return ldl.psd, vectors, weights


def rationalize(
    cert: MembershipCertificate, max_denominator: int = 2**20, feas_tol: float = 1e-8
) -> MembershipCertificate:
    """Round to rationals and absorb the exact residual into the identity block.

    Each block is first rounded entrywise, which snaps numerically zero faces to
    exact zeros; a block that is not exactly PSD after that is rebuilt as B^T B
    from rounded factor rows. The identity block must remain PSD after absorption.
    """
    target = cert.target.to_fraction()
    new_blocks: list[CertificateBlock] = []
    identity_pos = None
    for pos, block in enumerate(cert.blocks):
        size = block.spec.size
        if block.spec.generator_index == 0 and block.spec.kind is BlockKind.SCALAR:
            identity_pos = pos
        arr = block.gram_array()
        gram = _snap_gram(arr, max_denominator)
        if not exact_ldlt(gram).psd:
            try:
                fac = psd_factor(arr, feas_tol)
            except IndefiniteInput as exc:
                raise RationalizationFailed("Gram block is indefinite before rounding") from exc
            rows = [[_round(v, max_denominator) for v in row] for row in fac.factor]
            gram = _exact_gram_from_rows(rows, size)
        new_blocks.append(CertificateBlock(block.spec, gram, ()))
    if identity_pos is None:
        raise RationalizationFailed("certificate has no identity block to absorb the residual")

    multipliers = [
        EqualityMultiplier(
            m.equality_index,
            m.h.to_fraction(),
            m.multiplier.map_entries(lambda p: p.map_coefficients(lambda c: _round(c, max_denominator))),
        )
        for m in cert.multipliers
    ]
    draft = MembershipCertificate(
        target=target,
        presentation=cert.presentation,
        degree=cert.degree,
        blocks=tuple(new_blocks),
        multipliers=tuple(multipliers),
        exact=True,
    )
    gap = gram_residual(draft)

    ident = new_blocks[identity_pos]
    layout = block_layout(ident.spec)
    outside = [key for key in gap if key not in layout]
    if outside:
        raise RationalizationFailed(
            "residual has coefficients outside the identity block span", keys=len(outside)
        )
    gram = [list(row) for row in ident.gram]
    for key, r in gap.items():
        pairs = layout[key]
        # A_c = sym(E) with E_ij = coef; all identity coefficients are 1
        cells: dict[tuple[int, int], Fraction] = defaultdict(Fraction)
        for i, j, coef in pairs:
            cells[(i, j)] += Fraction(coef) / 2
            cells[(j, i)] += Fraction(coef) / 2
        norm_sq = sum((v * v for v in cells.values()), Fraction(0))
        for (i, j), v in cells.items():
            gram[i][j] += to_fraction(r) * v / norm_sq

    psd, vectors, weights = _ldl_factors(gram)
    if not psd:
        log_event(logger, "rationalize.failed", logging.INFO, reason="identity block not PSD")
        raise RationalizationFailed("absorbing the residual broke PSD-ness of the identity block")

    final_blocks = []
    for pos, block in enumerate(new_blocks):
        if pos == identity_pos:
            factors = _pack_factors(block.spec, vectors, weights)
            final_blocks.append(CertificateBlock(block.spec, gram, tuple(factors)))
        else:
            _, vecs, wts = _ldl_factors([list(r) for r in block.gram])
            final_blocks.append(
                CertificateBlock(block.spec, block.gram, tuple(_pack_factors(block.spec, vecs, wts)))
            )
    exact_cert = replace(draft, blocks=tuple(final_blocks))
    report = verify_certificate(exact_cert, "exact")
    if not report.passed:
        log_event(logger, "rationalize.failed", logging.INFO, reason=report.message)
        raise RationalizationFailed(f"exact verification failed: {report.message}")
    return replace(exact_cert, residual=report)
