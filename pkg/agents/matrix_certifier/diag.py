"""Branching symmetric diagonalization D = C^T f C over polynomials.

For an ordered pivot sequence P_1 c P_2 c ... the k-th column of C is the
last column of adj(f[P_k, P_k]) placed at the positions P_k, so

    D_kk = det f[P_{k-1}] * det f[P_k]

and no denominators appear.  A branch exists for every admissible pivot
choice; zero diagonals are repaired by a congruence with I + E_ij.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .errors import BranchCapExceeded, DimensionMismatch, InputError
from .observability import get_logger, log_event
from .polycore import MatrixPoly, ScalarPoly, congruence, mul

logger = get_logger(__name__)

DEFAULT_BRANCH_CAP = 64


@dataclass(frozen=True)
class DiagBranch:
    c: MatrixPoly
    d: MatrixPoly
    label: tuple[str, ...]

    def check(self, f: MatrixPoly) -> bool:
        """Exact congruence C^T f C == D with D diagonal."""
        return self.d.is_diagonal() and congruence(self.c, f.to_fraction()) == self.d


@dataclass(frozen=True)
class EquivalenceReport:
    points: int
    violations: int
    ambiguous: int
    first_violation: tuple[float, ...] | None = None

    @property
    def passed(self) -> bool:
        return self.violations == 0


@dataclass
class _Partial:
    work: MatrixPoly
    transform: MatrixPoly
    order: list[int]
    label: list[str]


def _principal_det(a: MatrixPoly, idx: Sequence[int]) -> ScalarPoly:
    if not idx:
        return ScalarPoly.constant(a.n, 1)
    return a.submatrix(idx, idx).determinant()


def _pivot_key(minor: ScalarPoly, j: int) -> tuple[int, int, int]:
    return (0 if minor.constant_term != 0 else 1, minor.degree, j)


def _column(a: MatrixPoly, order: Sequence[int]) -> list[ScalarPoly]:
    """adj(a[order, order]) e_last embedded at ``order``."""
    n, t = a.n, a.t
    col = [ScalarPoly.zero(n) for _ in range(t)]
    pivot = order[-1]
    if len(order) == 1 or all(a[pivot, k].is_zero for k in range(t) if k != pivot):
        col[pivot] = ScalarPoly.constant(n, 1)
        return col
    adj = a.submatrix(order, order).adjugate()
    last = len(order) - 1
    for pos, idx in enumerate(order):
        col[idx] = adj[pos, last]
    return col


def _repair(part: _Partial) -> _Partial | None:
    """Congruence by I + E_ij making a new principal minor nonzero."""
    a = part.work
    n, t = a.n, a.t
    rest = [j for j in range(t) if j not in part.order]
    for i in rest:
        for j in rest:
            if i == j or a[i, j].is_zero:
                continue
            p = MatrixPoly.identity(n, t) + MatrixPoly.unit(n, t, i, j)
            moved = congruence(p, a)
            if not _principal_det(moved, part.order + [j]).is_zero:
                return _Partial(moved, mul(part.transform, p), part.order, part.label + [f"repair({i},{j})"])
    return None


def _finish(part: _Partial, f: MatrixPoly) -> DiagBranch:
    a = part.work
    t = a.t
    order = list(part.order)
    order += [j for j in range(t) if j not in order]
    cols = [_column(a, order[: k + 1]) for k in range(t)]
    c_adj = MatrixPoly([[cols[k][r] for k in range(t)] for r in range(t)], a.n)
    c = mul(part.transform, c_adj)
    d = congruence(c, f)
    return DiagBranch(c, d, tuple(part.label))


def _normalized(d: MatrixPoly) -> tuple[str, ...]:
    """Diagonal entries up to positive scaling, as a sorted multiset."""
    out = []
    for e in d.diagonal_entries():
        if e.is_zero:
            out.append("0")
            continue
        _, lead = e.leading_term()
        out.append(repr(e.scale(1 / abs(lead))))
    return tuple(sorted(out))


def diagonalize_branching(f: MatrixPoly, branch_cap: int = DEFAULT_BRANCH_CAP) -> list[DiagBranch]:
    """Every admissible pivot order, deduplicated by D and ordered by label."""
    if not f.is_square:
        raise DimensionMismatch(f"expected a square matrix, got {f.shape}")
    if not f.is_symmetric():
        raise InputError("matrix polynomial must be symmetric")
    exact = f.to_fraction()
    t = exact.t
    if exact.is_diagonal():
        return [DiagBranch(MatrixPoly.identity(exact.n, t), exact, ("diagonal",))]
    branches: dict[tuple[str, ...], DiagBranch] = {}
    stack = [_Partial(exact, MatrixPoly.identity(exact.n, t), [], [])]
    while stack:
        part = stack.pop()
        if len(part.order) == t:
            branch = _finish(part, exact)
            key = _normalized(branch.d)
            if key not in branches:
                branches[key] = branch
                log_event(logger, "diag.branch", logging.DEBUG, label=list(branch.label))
                if len(branches) > branch_cap:
                    partial = sorted(branches.values(), key=lambda b: b.label)[:branch_cap]
                    raise BranchCapExceeded(
                        f"more than {branch_cap} branches", partial=partial, cap=branch_cap
                    )
            continue
        rest = [j for j in range(t) if j not in part.order]
        minors = [(j, _principal_det(part.work, part.order + [j])) for j in rest]
        admissible = sorted(((m, j) for j, m in minors if not m.is_zero), key=lambda mj: _pivot_key(*mj))
        if not admissible:
            repaired = _repair(part)
            if repaired is None:
                # Schur complement vanishes; remaining columns give zero entries
                stack.append(_Partial(part.work, part.transform, part.order + rest, part.label + ["zero"]))
            else:
                stack.append(repaired)
            continue
        for _, j in reversed(admissible):
            stack.append(_Partial(part.work, part.transform, part.order + [j], part.label + [str(j)]))
    out = sorted(branches.values(), key=lambda b: b.label)
    log_event(logger, "diag.finished", t=t, branches=len(out))
    return out


def entry_identity(d: MatrixPoly, j: int) -> MatrixPoly:
    """sum_k E_jk^T D E_jk, which equals d_jj * I for diagonal D."""
    if not d.is_diagonal():
        raise InputError("matrix-unit identity needs a diagonal D")
    n, t = d.n, d.t
    total = MatrixPoly.zeros(n, t)
    for k in range(t):
        total = total + congruence(MatrixPoly.unit(n, t, j, k), d)
    if total != MatrixPoly.scalar_identity(d[j, j], t):
        raise InputError("matrix-unit identity failed; D is not diagonal")
    return total


def trace_determinant_transformers(f: MatrixPoly) -> tuple[MatrixPoly, MatrixPoly, MatrixPoly]:
    """C1, C2 with C1^T f C1 + C2^T f C2 = diag(tr f, tr f * det f) for 2x2 f."""
    if f.shape != (2, 2):
        raise DimensionMismatch("expected a 2x2 matrix polynomial")
    a, b, c = f[0, 0], f[0, 1], f[1, 1]
    n = f.n
    one, zero = ScalarPoly.constant(n, 1), ScalarPoly.zero(n)
    c1 = MatrixPoly([[one, -b], [zero, a]], n)
    c2 = MatrixPoly([[zero, c], [one, -b]], n)
    tr = f.trace()
    rhs = MatrixPoly.diagonal([tr, tr * f.determinant()])
    return c1, c2, rhs


def check_equivalence(
    f: MatrixPoly, branches: Sequence[DiagBranch], points: np.ndarray, tol: float = 1e-9
) -> EquivalenceReport:
    """At each point, f(x) PSD iff every branch has D(x) PSD."""
    pts = np.asarray(points, dtype=float).reshape(-1, f.n)
    fv = f.evaluate_many(pts)
    f_min = np.linalg.eigvalsh(fv)[:, 0]
    f_scale = np.maximum(1.0, np.max(np.abs(fv), axis=(1, 2)))
    violations = ambiguous = 0
    first = None
    diag_values = [np.stack([e.evaluate_many(pts) for e in b.d.diagonal_entries()], axis=1) for b in branches]
    for p in range(pts.shape[0]):
        if abs(f_min[p]) <= tol * f_scale[p]:
            ambiguous += 1
            continue
        f_psd = f_min[p] > 0
        d_psd = True
        fuzzy = False
        for values in diag_values:
            row = values[p]
            bound = tol * max(1.0, float(np.max(np.abs(row))))
            if np.any(np.abs(row) <= bound):
                fuzzy = True
            if np.any(row < -bound):
                d_psd = False
        if f_psd != d_psd:
            if fuzzy:
                ambiguous += 1
                continue
            violations += 1
            if first is None:
                first = tuple(float(v) for v in pts[p])
    return EquivalenceReport(pts.shape[0], violations, ambiguous, first)


def sample_points(n: int, count: int, radius: float, seed: int | None) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(-radius, radius, size=(count, n))
