"""JSON wire formats.

PURPOSE:
    Pydantic models for every file the CLI reads or writes, plus the
    conversions between them and the in-memory types.

NOTES:
    Exact coefficients travel as {"num", "den"} integer pairs so rationals
    round-trip bit for bit; floats travel as {"value"}.  Gram entries and
    weights use the same number encoding.
"""

from __future__ import annotations

import json
import math
from collections.abc import Sequence
from fractions import Fraction
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .certify import SearchOutcome
from .diag import DiagBranch
from .errors import InputFormatError
from .gram import (
    BlockKind,
    BlockSpec,
    CertificateBlock,
    EqualityMultiplier,
    MembershipCertificate,
    ModulePresentation,
    ResidualReport,
    WeightedFactor,
)
from .polycore import Coeff, MatrixPoly, ScalarPoly
from .states import PointVectorPair, SeparatingState

CERTIFICATE_FORMAT = "matrix-certificate"
CERTIFICATE_VERSION = 1


# =============================================================================
# NUMBERS AND POLYNOMIALS
# =============================================================================


class NumberModel(BaseModel):
    """A rational {num, den} or a float {value}."""

    model_config = ConfigDict(extra="forbid")

    num: int | None = None
    den: int | None = Field(default=None, ge=1)
    value: float | None = None

    @model_validator(mode="after")
    def _one_encoding(self) -> NumberModel:
        exact = self.num is not None
        if exact == (self.value is not None):
            raise ValueError("give either num/den or value")
        if self.value is not None and not math.isfinite(self.value):
            raise ValueError("value must be finite")
        return self

    def to_coeff(self) -> Coeff:
        if self.num is not None:
            return Fraction(self.num, self.den or 1)
        assert self.value is not None
        return float(self.value)


def number_model(c: Coeff) -> NumberModel:
    if isinstance(c, Fraction):
        return NumberModel(num=c.numerator, den=c.denominator)
    return NumberModel(value=float(c))


class TermModel(NumberModel):
    monomial: list[int] = Field(default_factory=list)

    @model_validator(mode="after")
    def _nonnegative(self) -> TermModel:
        if any(e < 0 for e in self.monomial):
            raise ValueError("exponents must be nonnegative")
        return self


class ScalarPolyModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: int = Field(ge=0)
    terms: list[TermModel] = Field(default_factory=list)


class MatrixPolyModel(BaseModel):
    """Matrix polynomial; ``cols`` defaults to ``t`` (square)."""

    model_config = ConfigDict(extra="forbid")

    n: int = Field(ge=0)
    t: int = Field(ge=1)
    cols: int | None = Field(default=None, ge=1)
    entries: list[list[list[TermModel]]]

    @model_validator(mode="after")
    def _shape(self) -> MatrixPolyModel:
        cols = self.cols or self.t
        if len(self.entries) != self.t or any(len(row) != cols for row in self.entries):
            raise ValueError(f"entries must form a {self.t}x{cols} grid")
        return self


def _terms_model(p: ScalarPoly) -> list[TermModel]:
    out = []
    for mono, c in p.sorted_terms():
        base = number_model(c).model_dump(exclude_none=True)
        out.append(TermModel(monomial=list(mono), **base))
    return out


def _terms_from(n: int, terms: Sequence[TermModel]) -> ScalarPoly:
    acc: dict[tuple[int, ...], Coeff] = {}
    for term in terms:
        if len(term.monomial) != n:
            raise InputFormatError(f"monomial {term.monomial} does not have {n} exponents")
        mono = tuple(term.monomial)
        acc[mono] = acc.get(mono, 0) + term.to_coeff()
    return ScalarPoly(n, acc)


def scalar_to_model(p: ScalarPoly) -> ScalarPolyModel:
    return ScalarPolyModel(n=p.n, terms=_terms_model(p))


def scalar_from_model(m: ScalarPolyModel) -> ScalarPoly:
    return _terms_from(m.n, m.terms)


def matrix_to_model(a: MatrixPoly) -> MatrixPolyModel:
    return MatrixPolyModel(
        n=a.n,
        t=a.rows,
        cols=None if a.is_square else a.cols,
        entries=[[_terms_model(p) for p in row] for row in a.entries],
    )


def matrix_from_model(m: MatrixPolyModel) -> MatrixPoly:
    return MatrixPoly([[_terms_from(m.n, cell) for cell in row] for row in m.entries], m.n)


# =============================================================================
# PRESENTATIONS
# =============================================================================


class PresentationModel(BaseModel):
    """Generators may be 1x1; they are lifted to g * I_t."""

    model_config = ConfigDict(extra="forbid")

    n: int = Field(ge=0)
    t: int = Field(ge=1)
    generators: list[MatrixPolyModel] = Field(default_factory=list)
    equalities: list[ScalarPolyModel] = Field(default_factory=list)


def lift_generator(g: MatrixPoly, t: int) -> MatrixPoly:
    if g.shape == (1, 1) and t > 1:
        return MatrixPoly.scalar_identity(g[0, 0], t)
    return g


def presentation_to_model(p: ModulePresentation) -> PresentationModel:
    return PresentationModel(
        n=p.n,
        t=p.t,
        generators=[matrix_to_model(g) for g in p.generators],
        equalities=[scalar_to_model(h) for h in p.equalities],
    )


def presentation_from_model(m: PresentationModel) -> ModulePresentation:
    gens = tuple(lift_generator(matrix_from_model(g), m.t) for g in m.generators)
    eqs = tuple(scalar_from_model(h) for h in m.equalities)
    return ModulePresentation(m.n, m.t, gens, eqs)


# =============================================================================
# CERTIFICATES
# =============================================================================


class FactorModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    weight: NumberModel
    p: MatrixPolyModel


class BlockModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    generator_index: int = Field(ge=0)
    kind: BlockKind
    component: int | None = None
    basis: list[list[int]] = Field(default_factory=list)
    gram: list[list[NumberModel]] = Field(default_factory=list)
    factors: list[FactorModel] = Field(default_factory=list)


class MultiplierModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    equality_index: int = Field(ge=0)
    multiplier: MatrixPolyModel


class ResidualModel(BaseModel):
    mode: Literal["exact", "numeric"]
    passed: bool
    max_deviation: float | None = None
    min_gram_eigenvalue: float | None = None
    message: str = ""


class CertificateModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format: Literal["matrix-certificate"] = CERTIFICATE_FORMAT
    version: int = CERTIFICATE_VERSION
    degree: int = Field(ge=0)
    exact: bool
    target: MatrixPolyModel
    presentation: PresentationModel
    blocks: list[BlockModel]
    multipliers: list[MultiplierModel] = Field(default_factory=list)
    residual: ResidualModel | None = None
    notes: dict[str, Any] = Field(default_factory=dict)


def _finite(x: float) -> float | None:
    return x if math.isfinite(x) else None


def residual_to_model(r: ResidualReport) -> ResidualModel:
    return ResidualModel(
        mode="exact" if r.mode == "exact" else "numeric",
        passed=r.passed,
        max_deviation=_finite(float(r.max_deviation)),
        min_gram_eigenvalue=_finite(float(r.min_gram_eigenvalue)),
        message=r.message,
    )


def factor_to_model(f: WeightedFactor) -> FactorModel:
    return FactorModel(weight=number_model(f.weight), p=matrix_to_model(f.p))


def certificate_to_model(cert: MembershipCertificate) -> CertificateModel:
    blocks = [
        BlockModel(
            generator_index=b.spec.generator_index,
            kind=b.spec.kind,
            component=b.spec.component,
            basis=[list(m) for m in b.spec.basis],
            gram=[[number_model(v) for v in row] for row in b.gram],
            factors=[factor_to_model(f) for f in b.factors],
        )
        for b in cert.blocks
    ]
    return CertificateModel(
        degree=cert.degree,
        exact=cert.exact,
        target=matrix_to_model(cert.target),
        presentation=presentation_to_model(cert.presentation),
        blocks=blocks,
        multipliers=[
            MultiplierModel(equality_index=m.equality_index, multiplier=matrix_to_model(m.multiplier))
            for m in cert.multipliers
        ],
        residual=residual_to_model(cert.residual) if cert.residual else None,
        notes=_jsonable_notes(cert.notes),
    )


def _block_spec(b: BlockModel, pres: ModulePresentation) -> BlockSpec:
    n, t = pres.n, pres.t
    if b.generator_index == 0:
        g = MatrixPoly.identity(n, t)
    elif b.generator_index <= len(pres.generators):
        g = pres.generators[b.generator_index - 1]
    else:
        raise InputFormatError(f"block refers to missing generator {b.generator_index}")
    basis = tuple(tuple(m) for m in b.basis)
    if any(len(m) != n for m in basis):
        raise InputFormatError("basis monomial has the wrong number of exponents")
    if b.kind is BlockKind.SCALAR:
        s = g.scalar_part()
        if s is None:
            raise InputFormatError(f"generator {b.generator_index} is not scalar")
        weight = MatrixPoly.from_scalar(s)
    elif b.kind is BlockKind.DIAGONAL:
        if b.component is None or not 0 <= b.component < t:
            raise InputFormatError("diagonal block needs a valid component")
        weight = MatrixPoly.from_scalar(g[b.component, b.component])
    else:
        weight = g
    return BlockSpec(b.generator_index, b.kind, b.component, basis, weight, g)


def certificate_from_model(m: CertificateModel) -> MembershipCertificate:
    pres = presentation_from_model(m.presentation)
    blocks = []
    for b in m.blocks:
        spec = _block_spec(b, pres)
        gram = [[v.to_coeff() for v in row] for row in b.gram]
        if gram and (len(gram) != spec.size or any(len(row) != spec.size for row in gram)):
            raise InputFormatError(
                f"Gram block of generator {b.generator_index} must be {spec.size}x{spec.size}"
            )
        factors = tuple(
            WeightedFactor(f.weight.to_coeff(), matrix_from_model(f.p)) for f in b.factors
        )
        blocks.append(CertificateBlock(spec, gram, factors))
    mults = []
    for mm in m.multipliers:
        if mm.equality_index >= len(pres.equalities):
            raise InputFormatError(f"multiplier refers to missing equality {mm.equality_index}")
        mults.append(
            EqualityMultiplier(
                mm.equality_index, pres.equalities[mm.equality_index], matrix_from_model(mm.multiplier)
            )
        )
    return MembershipCertificate(
        target=matrix_from_model(m.target),
        presentation=pres,
        degree=m.degree,
        blocks=tuple(blocks),
        multipliers=tuple(mults),
        exact=m.exact,
        notes=dict(m.notes),
    )


def _jsonable_notes(notes: dict[str, Any]) -> dict[str, Any]:
    return json.loads(json.dumps(notes, default=str))


# =============================================================================
# STATES, PAIRS, OUTCOMES
# =============================================================================


class MomentModel(BaseModel):
    monomial: list[int]
    k: int = Field(ge=0)
    l: int = Field(ge=0)  # noqa: E741
    value: float


class StateModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: int = Field(ge=0)
    t: int = Field(ge=1)
    degree: int = Field(ge=0)
    value: float
    normalization: float
    slacks: list[float] = Field(default_factory=list)
    moments: list[MomentModel]


class PairModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    x: list[float]
    v: list[float]


class AttemptModel(BaseModel):
    degree: int
    status: str
    reason: str = ""


class BranchModel(BaseModel):
    label: list[str]
    c: MatrixPolyModel
    d: MatrixPolyModel


class OutcomeModel(BaseModel):
    verdict: Literal["CertificateFound", "Separated", "ExhaustedDegrees"]
    degree: int
    elapsed_ms: float | None = None
    epsilon: float = 0.0
    attempts: list[AttemptModel] = Field(default_factory=list)
    certificate: CertificateModel | None = None
    state: StateModel | None = None
    pair: PairModel | None = None
    transformers: list[FactorModel] = Field(default_factory=list)
    rearranged: CertificateModel | None = None
    substitution_residual: MatrixPolyModel | None = None
    notes: dict[str, Any] = Field(default_factory=dict)


def state_to_model(s: SeparatingState) -> StateModel:
    from .states import sorted_moment_items

    return StateModel(
        n=s.n,
        t=s.t,
        degree=s.degree,
        value=float(s.value),
        normalization=float(s.normalization),
        slacks=[float(v) for v in s.slacks],
        moments=[
            MomentModel(monomial=list(mono), k=k, l=l, value=float(v))
            for (mono, k, l), v in sorted_moment_items(s)  # noqa: E741
        ],
    )


def state_from_model(m: StateModel) -> SeparatingState:
    from .states import state_from_moments

    moments = {(tuple(mm.monomial), mm.k, mm.l): mm.value for mm in m.moments}
    return state_from_moments(m.n, m.t, m.degree, moments, m.value)


def pair_to_model(p: PointVectorPair) -> PairModel:
    return PairModel(x=list(p.x), v=list(p.v))


def pair_from_model(m: PairModel) -> PointVectorPair:
    return PointVectorPair(tuple(m.x), tuple(m.v))


def branch_to_model(b: DiagBranch) -> BranchModel:
    return BranchModel(label=list(b.label), c=matrix_to_model(b.c), d=matrix_to_model(b.d))


def outcome_to_model(o: SearchOutcome, *, deterministic: bool = False) -> OutcomeModel:
    return OutcomeModel(
        verdict=o.verdict.value,
        degree=o.degree,
        elapsed_ms=None if deterministic else o.elapsed_ms,
        epsilon=o.epsilon,
        attempts=[AttemptModel(degree=a.degree, status=a.status, reason=a.reason) for a in o.attempts],
        certificate=certificate_to_model(o.certificate) if o.certificate else None,
        state=state_to_model(o.state) if o.state else None,
        pair=pair_to_model(o.pair) if o.pair else None,
        transformers=[factor_to_model(f) for f in o.transformers],
        rearranged=certificate_to_model(o.rearranged) if o.rearranged else None,
        substitution_residual=(
            matrix_to_model(o.substitution_residual) if o.substitution_residual is not None else None
        ),
        notes=_jsonable_notes(o.notes),
    )


# =============================================================================
# FILE I/O
# =============================================================================


def read_model(path: Path, model: type[BaseModel]) -> Any:
    """Parse a JSON file into ``model``; any failure is an InputFormatError."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputFormatError(f"cannot read {path}: {exc}") from exc
    try:
        return model.model_validate_json(text)
    except ValidationError as exc:
        raise InputFormatError(
            f"{path} is not a valid {model.__name__}", errors=exc.errors(include_url=False)
        ) from exc


def read_matrix(path: Path) -> MatrixPoly:
    return matrix_from_model(read_model(path, MatrixPolyModel))


def read_certificate(path: Path) -> MembershipCertificate:
    return certificate_from_model(read_model(path, CertificateModel))


def dump(model: BaseModel) -> dict[str, Any]:
    return model.model_dump(mode="json", exclude_none=True)
