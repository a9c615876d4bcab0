"""Numeric oracle for S_G: membership, rejection sampling and eigenvalue stats."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .errors import DimensionMismatch, EmptyBoxOrNoSamples
from .gram import ModulePresentation
from .observability import get_logger, log_event
from .polycore import MatrixPoly

logger = get_logger(__name__)

EMPTY_SUSPECT_DRAWS = 100_000
BATCH = 4096
HISTOGRAM_BINS = 10


@dataclass(frozen=True)
class SampleReport:
    points: np.ndarray
    draws: int
    accepted: int
    box: tuple[tuple[float, float], ...]
    seed: int | None
    hits: int

    @property
    def acceptance_rate(self) -> float:
        """In-region share of all draws, including hits past ``count``."""
        return self.hits / self.draws if self.draws else 0.0

    @property
    def empty_suspected(self) -> bool:
        """Heuristic only; never a proof that S_G is empty."""
        return self.accepted == 0 and self.draws >= EMPTY_SUSPECT_DRAWS


@dataclass(frozen=True)
class MinEigStats:
    minimum: float
    argmin: tuple[float, ...]
    histogram: tuple[int, ...]
    bin_edges: tuple[float, ...]
    count: int


def _generator_mins(presentation: ModulePresentation, pts: np.ndarray) -> np.ndarray:
    """(P, |G|) minimum eigenvalues of every generator at every point."""
    if not presentation.generators:
        return np.zeros((pts.shape[0], 0))
    cols = []
    for g in presentation.generators:
        vals = g.evaluate_many(pts)
        cols.append(np.linalg.eigvalsh(0.5 * (vals + np.transpose(vals, (0, 2, 1))))[:, 0])
    return np.stack(cols, axis=1)


def _region_mask(presentation: ModulePresentation, pts: np.ndarray, tol: float) -> np.ndarray:
    mask = np.all(_generator_mins(presentation, pts) >= -tol, axis=1)
    for h in presentation.equalities:
        mask &= np.abs(h.evaluate_many(pts)) <= tol
    return np.asarray(mask, dtype=bool)


def in_region(presentation: ModulePresentation, x: Sequence[float], tol: float = 1e-9) -> bool:
    """lambda_min(g(x)) >= -tol for every generator and |h(x)| <= tol for equalities."""
    pts = np.asarray(x, dtype=float).reshape(1, -1)
    if pts.shape[1] != presentation.n:
        raise DimensionMismatch(f"point has {pts.shape[1]} coordinates, expected {presentation.n}")
    return bool(_region_mask(presentation, pts, tol)[0])


def _box(n: int, box: Sequence[tuple[float, float]] | float) -> tuple[tuple[float, float], ...]:
    if isinstance(box, int | float):
        bounds = tuple((-float(box), float(box)) for _ in range(n))
    else:
        bounds = tuple((float(lo), float(hi)) for lo, hi in box)
    if len(bounds) != n:
        raise DimensionMismatch(f"box has {len(bounds)} sides, expected {n}")
    for lo, hi in bounds:
        if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
            raise EmptyBoxOrNoSamples(f"invalid box side [{lo}, {hi}]")
    return bounds


def sample_region(
    presentation: ModulePresentation,
    count: int,
    box: Sequence[tuple[float, float]] | float = 2.0,
    seed: int | None = None,
    *,
    tol: float = 1e-9,
    max_draws: int | None = None,
) -> SampleReport:
    """Uniform rejection sampling of ``count`` points of S_G inside ``box``."""
    if count < 0:
        raise EmptyBoxOrNoSamples("count must be nonnegative")
    n = presentation.n
    bounds = _box(n, box)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    limit = max_draws if max_draws is not None else max(EMPTY_SUSPECT_DRAWS, 1000 * count)
    rng = np.random.default_rng(seed)
    kept: list[np.ndarray] = []
    accepted = draws = hits = 0
    while accepted < count and draws < limit:
        size = min(BATCH, limit - draws)
        pts = lo + (hi - lo) * rng.random((size, n))
        ok = pts[_region_mask(presentation, pts, tol)]
        draws += size
        hits += len(ok)
        take = ok[: count - accepted]
        kept.append(take)
        accepted += len(take)
    points = np.concatenate(kept, axis=0) if kept else np.zeros((0, n))
    report = SampleReport(points, draws, accepted, bounds, seed, hits)
    log_event(
        logger,
        "setops.sampled",
        draws=draws,
        accepted=accepted,
        acceptance_rate=report.acceptance_rate,
        empty_suspected=report.empty_suspected,
    )
    return report


def min_eig_stats(f: MatrixPoly, points: npt.ArrayLike) -> MinEigStats:
    """Minimum of lambda_min(f(x)) over the points, where it occurs, and a histogram."""
    pts = np.asarray(points, dtype=float).reshape(-1, f.n)
    if pts.shape[0] == 0:
        raise EmptyBoxOrNoSamples("no points to evaluate")
    vals = f.evaluate_many(pts)
    mins = np.linalg.eigvalsh(0.5 * (vals + np.transpose(vals, (0, 2, 1))))[:, 0]
    worst = int(np.argmin(mins))
    hist, edges = np.histogram(mins, bins=HISTOGRAM_BINS)
    return MinEigStats(
        minimum=float(mins[worst]),
        argmin=tuple(float(v) for v in pts[worst]),
        histogram=tuple(int(v) for v in hist),
        bin_edges=tuple(float(v) for v in edges),
        count=int(pts.shape[0]),
    )


def max_eig_min(f: MatrixPoly, points: npt.ArrayLike) -> float:
    """Minimum over the points of lambda_max(f(x))."""
    vals = f.evaluate_many(np.asarray(points, dtype=float).reshape(-1, f.n))
    if vals.shape[0] == 0:
        raise EmptyBoxOrNoSamples("no points to evaluate")
    return float(np.min(np.linalg.eigvalsh(0.5 * (vals + np.transpose(vals, (0, 2, 1))))[:, -1]))
