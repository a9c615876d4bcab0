"""Dense symmetric linear algebra kernels.

Jacobi eigensolver for the small PSD blocks we factor, LAPACK above
``JACOBI_MAX_DIM`` and inside the interior-point loop; LU solves through
scipy; an exact LDL^T over ``Fraction`` for certifying rational Gram blocks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import TypeAlias

import numpy as np
import numpy.typing as npt
import scipy.linalg as sla

from .errors import DimensionMismatch, IndefiniteInput, NonFiniteInput, SingularSystem

FloatArray: TypeAlias = npt.NDArray[np.float64]

JACOBI_MAX_DIM = 256
JACOBI_MAX_SWEEPS = 100
PIVOT_RTOL = 1e-13
RESIDUAL_RTOL = 1e-9


def _as_symmetric(a: npt.ArrayLike) -> FloatArray:
    m = np.array(a, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteInput("matrix has non-finite entries")
    return 0.5 * (m + m.T)


def pack_lower(a: npt.ArrayLike) -> FloatArray:
    """Row-major packed lower triangle of a symmetric matrix."""
    m = _as_symmetric(a)
    return m[np.tril_indices(m.shape[0])]


def unpack_lower(packed: npt.ArrayLike, dim: int) -> FloatArray:
    values = np.asarray(packed, dtype=float)
    if values.size != dim * (dim + 1) // 2:
        raise DimensionMismatch(f"{values.size} packed entries do not fill a {dim}x{dim} matrix")
    out = np.zeros((dim, dim))
    out[np.tril_indices(dim)] = values
    return out + np.tril(out, -1).T


# =============================================================================
# EIGENVALUES
# =============================================================================


def _jacobi(a: FloatArray) -> tuple[FloatArray, FloatArray]:
    m = a.copy()
    dim = m.shape[0]
    v = np.eye(dim)
    scale = max(float(np.linalg.norm(m)), np.finfo(float).tiny)
    for _ in range(JACOBI_MAX_SWEEPS):
        off = float(np.linalg.norm(m - np.diag(np.diag(m))))
        if off <= 1e-15 * scale:
            break
        for p in range(dim - 1):
            for q in range(p + 1, dim):
                apq = m[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (m[q, q] - m[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p, col_q = m[:, p].copy(), m[:, q].copy()
                m[:, p] = c * col_p - s * col_q
                m[:, q] = s * col_p + c * col_q
                row_p, row_q = m[p, :].copy(), m[q, :].copy()
                m[p, :] = c * row_p - s * row_q
                m[q, :] = s * row_p + c * row_q
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return np.diag(m).copy(), v


def sym_eigen(a: npt.ArrayLike) -> tuple[FloatArray, FloatArray]:
    """Eigenvalues ascending and orthonormal eigenvectors (columns)."""
    m = _as_symmetric(a)
    if m.shape[0] == 0:
        return np.zeros(0), np.zeros((0, 0))
    if m.shape[0] > JACOBI_MAX_DIM:
        w, v = np.linalg.eigh(m)
        return w, v
    w, v = _jacobi(m)
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def min_eigenvalue(a: npt.ArrayLike) -> float:
    m = _as_symmetric(a)
    if m.shape[0] == 0:
        return 0.0
    return float(np.linalg.eigvalsh(m)[0])


def max_eigenvalue(a: npt.ArrayLike) -> float:
    m = _as_symmetric(a)
    if m.shape[0] == 0:
        return 0.0
    return float(np.linalg.eigvalsh(m)[-1])


# =============================================================================
# PSD FACTORIZATION
# =============================================================================


@dataclass(frozen=True)
class PsdFactor:
    """``factor.T @ factor`` approximates the input; ``clamped`` is the largest
    magnitude of a small negative eigenvalue that was set to zero."""

    factor: FloatArray
    rank: int
    clamped: float


def psd_factor(a: npt.ArrayLike, tol: float = 1e-8) -> PsdFactor:
    """Rectangular B with rows = numerical rank and B^T B close to A."""
    m = _as_symmetric(a)
    dim = m.shape[0]
    if dim == 0:
        return PsdFactor(np.zeros((0, 0)), 0, 0.0)
    w, v = sym_eigen(m)
    threshold = tol * max(1.0, float(w[-1]))
    if w[0] < -threshold:
        raise IndefiniteInput(
            f"matrix has eigenvalue {w[0]:.3e} below -{threshold:.1e}",
            min_eigenvalue=float(w[0]),
        )
    clamped = float(max(0.0, -w[0]))
    keep = np.flatnonzero(w > threshold)
    order = keep[np.argsort(-w[keep], kind="stable")]
    factor = np.sqrt(w[order])[:, None] * v[:, order].T
    return PsdFactor(factor, int(order.size), clamped)


# =============================================================================
# LINEAR SYSTEMS
# =============================================================================


def solve_linear(a: npt.ArrayLike, b: npt.ArrayLike) -> FloatArray:
    """Solve ``a x = b`` for one or several right-hand sides by LU."""
    m = np.asarray(a, dtype=float)
    rhs = np.asarray(b, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    if rhs.shape[0] != m.shape[0]:
        raise DimensionMismatch("right-hand side does not match the system size")
    if not (np.all(np.isfinite(m)) and np.all(np.isfinite(rhs))):
        raise NonFiniteInput("linear system has non-finite entries")
    if m.shape[0] == 0:
        return np.zeros(rhs.shape)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        try:
            lu, piv = sla.lu_factor(m, check_finite=False)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise SingularSystem(f"LU factorization failed: {exc}") from exc
        pivots = np.abs(np.diag(lu))
        norm_a = float(np.linalg.norm(m, np.inf))
        if norm_a == 0.0 or pivots.min() <= PIVOT_RTOL * norm_a:
            raise SingularSystem(
                "pivot below threshold", min_pivot=float(pivots.min()), norm=norm_a
            )
        x = sla.lu_solve((lu, piv), rhs, check_finite=False)

    residual = np.linalg.norm(m @ x - rhs)
    bound = RESIDUAL_RTOL * (np.linalg.norm(m) * np.linalg.norm(x) + np.linalg.norm(rhs))
    if not np.isfinite(residual) or residual > bound:
        raise SingularSystem("residual check failed", residual=float(residual))
    return np.asarray(x, dtype=float)


# =============================================================================
# EXACT LDL^T
# =============================================================================


@dataclass(frozen=True)
class ExactLdl:
    """P A P^T = L D L^T over the rationals; ``perm`` lists original indices."""

    psd: bool
    d: list[Fraction]
    l: list[list[Fraction]]  # noqa: E741
    perm: list[int]


def exact_ldlt(a: list[list[Fraction]]) -> ExactLdl:
    """Symmetric LDL^T with largest-diagonal pivoting in exact arithmetic.

    ``psd`` is True iff the matrix is positive semidefinite: all pivots are
    nonnegative and a zero pivot leaves a zero column.
    """
    dim = len(a)
    work = [[Fraction(v) for v in row] for row in a]
    perm = list(range(dim))
    lower = [[Fraction(int(i == j)) for j in range(dim)] for i in range(dim)]
    diag: list[Fraction] = []
    psd = True
    for k in range(dim):
        pivot = max(range(k, dim), key=lambda i: work[i][i])
        if pivot != k:
            work[k], work[pivot] = work[pivot], work[k]
            for row in work:
                row[k], row[pivot] = row[pivot], row[k]
            perm[k], perm[pivot] = perm[pivot], perm[k]
            for j in range(k):
                lower[k][j], lower[pivot][j] = lower[pivot][j], lower[k][j]
        dk = work[k][k]
        if dk < 0:
            psd = False
        if dk == 0:
            # remaining diagonal is zero; PSD only if the rest vanishes too
            if any(work[i][j] != 0 for i in range(k, dim) for j in range(k, dim)):
                psd = False
            diag.extend([Fraction(0)] * (dim - k))
            break
        diag.append(dk)
        for i in range(k + 1, dim):
            lower[i][k] = work[i][k] / dk
        for i in range(k + 1, dim):
            lik = lower[i][k]
            if lik == 0:
                continue
            for j in range(k + 1, dim):
                work[i][j] -= lik * work[k][j]
        if dk < 0:
            break
    return ExactLdl(psd=psd, d=diag, l=lower, perm=perm)


def is_psd_exact(a: list[list[Fraction]]) -> bool:
    return exact_ldlt(a).psd
