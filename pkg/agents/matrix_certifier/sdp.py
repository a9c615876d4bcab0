"""Block-diagonal SDP feasibility solver.

PURPOSE:
    Decide feasibility of

        find X = diag(X_1, ..., X_B) >= 0, u free
        s.t. <A_i, X> + (B u)_i = b_i,  i = 1..m

    optionally minimizing <C, X> + c_u . u.  A primal-dual interior-point method
    on the homogeneous self-dual embedding with Nesterov-Todd scaling returns
    either a primal solution or a dual ray z (sum z_i A_i >= 0, B^T z = 0,
    b . z < 0) which is re-verified by an independent eigen routine before an
    instance is declared infeasible.

NOTES:
    - Deterministic: fixed start X = S = I, y = u = 0, tau = kappa = 1.
    - One Schur-complement LU per iteration, shared by predictor and corrector.
"""

from __future__ import annotations

import json
import logging
import time
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, NamedTuple, TypeAlias

import numpy as np
import numpy.typing as npt

from .config import SdpOptions
from .errors import MalformedInstance, SingularSystem
from .numla import sym_eigen, solve_linear
from .observability import get_logger, log_event

FloatArray: TypeAlias = npt.NDArray[np.float64]

logger = get_logger(__name__)

STEP_FRACTION = 0.95
MIN_STEP = 1e-10
RAY_MARGIN_FACTOR = 10.0


class SdpStatus(str, Enum):
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    UNKNOWN = "Unknown"


# =============================================================================
# INSTANCE
# =============================================================================


@dataclass(frozen=True, eq=False)
class SdpInstance:
    """Dense coefficient data; ``coefficients[b][i]`` is A_i restricted to block b."""

    block_dims: tuple[int, ...]
    coefficients: tuple[FloatArray, ...]
    rhs: FloatArray
    objective: tuple[FloatArray, ...] | None = None
    free_columns: FloatArray | None = None
    free_objective: FloatArray | None = None

    def __post_init__(self) -> None:
        if not self.block_dims:
            raise MalformedInstance("instance needs at least one PSD block")
        if any(d < 1 for d in self.block_dims):
            raise MalformedInstance("block dimensions must be positive")
        if len(self.coefficients) != len(self.block_dims):
            raise MalformedInstance("one coefficient array per block is required")
        m = self.rhs.shape[0] if self.rhs.ndim == 1 else -1
        if m < 0:
            raise MalformedInstance("rhs must be a vector")
        if not np.all(np.isfinite(self.rhs)):
            raise MalformedInstance("rhs has non-finite entries")
        for dim, coeff in zip(self.block_dims, self.coefficients, strict=True):
            if coeff.shape != (m, dim, dim):
                raise MalformedInstance(
                    f"coefficient block has shape {coeff.shape}, expected {(m, dim, dim)}"
                )
            if not np.all(np.isfinite(coeff)):
                raise MalformedInstance("coefficient matrices have non-finite entries")
            if not np.allclose(coeff, np.swapaxes(coeff, 1, 2), atol=1e-12):
                raise MalformedInstance("coefficient matrices must be symmetric")
        if self.objective is not None:
            if len(self.objective) != len(self.block_dims):
                raise MalformedInstance("objective needs one matrix per block")
            for dim, c in zip(self.block_dims, self.objective, strict=True):
                if c.shape != (dim, dim) or not np.allclose(c, c.T, atol=1e-12):
                    raise MalformedInstance("objective blocks must be symmetric and sized")
        if self.free_columns is not None:
            if self.free_columns.ndim != 2 or self.free_columns.shape[0] != m:
                raise MalformedInstance("free_columns must have one row per constraint")
            k = self.free_columns.shape[1]
            if self.free_objective is not None and self.free_objective.shape != (k,):
                raise MalformedInstance("free_objective must have one entry per free column")
        elif self.free_objective is not None:
            raise MalformedInstance("free_objective given without free_columns")

    @classmethod
    def from_constraints(
        cls,
        block_dims: Sequence[int],
        constraints: Sequence[tuple[Sequence[npt.ArrayLike], float]],
        objective: Sequence[npt.ArrayLike] | None = None,
    ) -> SdpInstance:
        """Build from ``[(per-block matrices, rhs), ...]``."""
        dims = tuple(int(d) for d in block_dims)
        m = len(constraints)
        coeffs = [np.zeros((m, d, d)) for d in dims]
        rhs = np.zeros(m)
        for i, (mats, value) in enumerate(constraints):
            if len(mats) != len(dims):
                raise MalformedInstance(f"constraint {i} has {len(mats)} blocks, expected {len(dims)}")
            for b, mat in enumerate(mats):
                arr = np.asarray(mat, dtype=float)
                if arr.shape != (dims[b], dims[b]):
                    raise MalformedInstance(f"constraint {i} block {b} has shape {arr.shape}")
                coeffs[b][i] = arr
            rhs[i] = float(value)
        obj = None if objective is None else tuple(np.asarray(c, dtype=float) for c in objective)
        return cls(dims, tuple(coeffs), rhs, obj)

    @property
    def num_constraints(self) -> int:
        return int(self.rhs.shape[0])

    @property
    def num_free(self) -> int:
        return 0 if self.free_columns is None else int(self.free_columns.shape[1])

    def apply(self, blocks: Sequence[FloatArray]) -> FloatArray:
        """A(X): vector of <A_i, X>."""
        out = np.zeros(self.num_constraints)
        for coeff, x in zip(self.coefficients, blocks, strict=True):
            out += coeff.reshape(coeff.shape[0], -1) @ x.ravel()
        return out

    def adjoint(self, y: FloatArray) -> list[FloatArray]:
        """A*(y): per-block sum y_i A_i."""
        return [
            (y @ coeff.reshape(coeff.shape[0], -1)).reshape(d, d)
            for d, coeff in zip(self.block_dims, self.coefficients, strict=True)
        ]

    # --- debug dump --------------------------------------------------------

    def to_json(self) -> dict[str, Any]:
        constraints = []
        for i in range(self.num_constraints):
            entries = [
                [b, int(r), int(c), float(coeff[i, r, c])]
                for b, coeff in enumerate(self.coefficients)
                for r, c in zip(*np.nonzero(np.triu(coeff[i])), strict=True)
            ]
            row: dict[str, Any] = {"rhs": float(self.rhs[i]), "entries": entries}
            if self.free_columns is not None:
                row["free"] = [float(v) for v in self.free_columns[i]]
            constraints.append(row)
        data: dict[str, Any] = {
            "block_dims": list(self.block_dims),
            "constraints": constraints,
        }
        if self.objective is not None:
            data["objective"] = [
                [[b, int(r), int(c), float(obj[r, c])] for r, c in zip(*np.nonzero(np.triu(obj)), strict=True)]
                for b, obj in enumerate(self.objective)
            ]
        if self.free_objective is not None:
            data["free_objective"] = [float(v) for v in self.free_objective]
        return data

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> SdpInstance:
        try:
            dims = tuple(int(d) for d in data["block_dims"])
            rows = data["constraints"]
            m = len(rows)
            coeffs = [np.zeros((m, d, d)) for d in dims]
            rhs = np.array([float(r["rhs"]) for r in rows]) if m else np.zeros(0)
            for i, row in enumerate(rows):
                for b, r, c, v in row["entries"]:
                    coeffs[b][i, r, c] = v
                    coeffs[b][i, c, r] = v
            objective = None
            if "objective" in data:
                objective = tuple(np.zeros((d, d)) for d in dims)
                for b, block in enumerate(data["objective"]):
                    for _, r, c, v in block:
                        objective[b][r, c] = v
                        objective[b][c, r] = v
            free = None
            if m and "free" in rows[0]:
                free = np.array([r["free"] for r in rows], dtype=float)
            free_obj = None
            if "free_objective" in data:
                free_obj = np.array(data["free_objective"], dtype=float)
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise MalformedInstance(f"invalid instance dump: {exc}") from exc
        return cls(dims, tuple(coeffs), rhs, objective, free, free_obj)

    def dump(self, path: Path) -> None:
        path.write_text(json.dumps(self.to_json(), indent=2), encoding="utf-8")


# =============================================================================
# SOLUTION
# =============================================================================


@dataclass(frozen=True, eq=False)
class RayCheck:
    ok: bool
    margin: float
    min_eigenvalue: float
    free_residual: float


@dataclass(frozen=True, eq=False)
class SdpSolution:
    status: SdpStatus
    primal: list[FloatArray]
    dual: FloatArray
    free: FloatArray
    dual_ray: FloatArray | None = None
    metrics: dict[str, Any] = field(default_factory=dict)

    @property
    def primal_objective(self) -> float:
        return float(self.metrics.get("primal_objective", 0.0))


def verify_dual_ray(inst: SdpInstance, z: FloatArray, tol: float) -> RayCheck:
    """Check z is a separating ray: sum z_i A_i >= 0, B^T z = 0, b . z < 0.

    ``z`` is normalized so that the block operator has unit Frobenius norm
    (unit vector norm when the operator vanishes). Uses the Jacobi eigensolver,
    independent of the LAPACK routines inside the interior-point loop.
    """
    if not np.all(np.isfinite(z)):
        return RayCheck(False, float("nan"), float("nan"), float("nan"))
    blocks = inst.adjoint(z)
    size = float(np.sqrt(sum(float(np.sum(b * b)) for b in blocks)))
    if size <= 1e-14 * max(1.0, float(np.linalg.norm(z))):
        size = float(np.linalg.norm(z))
        if size == 0.0:
            return RayCheck(False, 0.0, 0.0, 0.0)
    zn = z / size
    min_eig = min(float(sym_eigen(b / size)[0][0]) for b in blocks)
    margin = -float(inst.rhs @ zn)
    free_res = 0.0
    if inst.free_columns is not None:
        free_res = float(np.linalg.norm(inst.free_columns.T @ zn))
    ok = (
        margin >= RAY_MARGIN_FACTOR * tol
        and min_eig >= -tol
        and free_res <= tol * max(1.0, float(np.linalg.norm(zn)))
    )
    return RayCheck(ok, margin, min_eig, free_res)


# =============================================================================
# INTERIOR-POINT METHOD
# =============================================================================


def _nt_scaling(x: FloatArray, s: FloatArray) -> tuple[FloatArray, FloatArray]:
    """W with W S W = X, and S^{-1}."""
    lx = np.linalg.cholesky(x)
    ls = np.linalg.cholesky(s)
    u, sv, vt = np.linalg.svd(ls.T @ lx)
    r = lx @ vt.T @ np.diag(1.0 / np.sqrt(sv))
    w = r @ r.T
    ls_inv = np.linalg.inv(ls)
    s_inv = ls_inv.T @ ls_inv
    return 0.5 * (w + w.T), 0.5 * (s_inv + s_inv.T)


def _max_step(x: FloatArray, dx: FloatArray) -> float:
    """Largest alpha with x + alpha dx >= 0 (x positive definite)."""
    l_inv = np.linalg.inv(np.linalg.cholesky(x))
    lam = np.linalg.eigvalsh(l_inv @ dx @ l_inv.T)[0]
    return float("inf") if lam >= 0 else float(-1.0 / lam)


def _scalar_step(v: float, dv: float) -> float:
    return float("inf") if dv >= 0 else -v / dv


def _inner(a: Sequence[FloatArray], b: Sequence[FloatArray]) -> float:
    return float(sum(float(np.sum(x * y)) for x, y in zip(a, b, strict=True)))


def _schur(inst: SdpInstance, ws: Sequence[FloatArray]) -> FloatArray:
    m = inst.num_constraints
    out = np.zeros((m, m))
    for coeff, w in zip(inst.coefficients, ws, strict=True):
        waw = w[None, :, :] @ coeff @ w[None, :, :]
        out += coeff.reshape(m, -1) @ waw.reshape(m, -1).T
    return 0.5 * (out + out.T)


def _solve_kkt(kkt: FloatArray, rhs: FloatArray) -> FloatArray:
    try:
        return solve_linear(kkt, rhs)
    except SingularSystem:
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
        return np.asarray(sol, dtype=float)


def _zero_solution(inst: SdpInstance) -> SdpSolution:
    return SdpSolution(
        status=SdpStatus.FEASIBLE,
        primal=[np.zeros((d, d)) for d in inst.block_dims],
        dual=np.zeros(0),
        free=np.zeros(inst.num_free),
        metrics={"iterations": 0, "primal_residual": 0.0, "dual_residual": 0.0, "gap": 0.0},
    )


class _Direction(NamedTuple):
    dx: list[FloatArray]
    dy: FloatArray
    du: FloatArray
    ds: list[FloatArray]
    dtau: float
    dkappa: float


@dataclass
class _NewtonSystem:
    """Per-iteration data of the embedded Newton system.

    ``sol`` holds K^{-1} applied to four right-hand sides: the eta part, the
    sigma part and the constant part of h1, then [A(WCW) + b; c_u].
    """

    inst: SdpInstance
    sol: FloatArray
    xs: list[FloatArray]
    ss: list[FloatArray]
    ws: list[FloatArray]
    s_invs: list[FloatArray]
    w_rd_w: list[FloatArray]
    wcw: list[FloatArray]
    rd: list[FloatArray]
    c_blocks: list[FloatArray]
    a_vec: FloatArray
    cu: FloatArray
    wcw_c: float
    rg: float
    mu: float
    tau: float
    kappa: float

    def direction(self, sigma: float, eta: float) -> _Direction:
        m = self.inst.num_constraints
        b = self.inst.rhs
        z1 = eta * self.sol[:, 0] + sigma * self.sol[:, 1] + self.sol[:, 2]
        z2 = self.sol[:, 3]
        g = [
            sigma * self.mu * si - x - eta * wrw
            for si, x, wrw in zip(self.s_invs, self.xs, self.w_rd_w, strict=True)
        ]
        h3 = (
            eta * self.rg
            + _inner(self.c_blocks, g)
            + (sigma * self.mu - self.tau * self.kappa) / self.tau
        )
        bma = b - self.a_vec
        denom = float(bma @ z2[:m] - self.cu @ z2[m:]) + self.wcw_c + self.kappa / self.tau
        dtau = (h3 - float(bma @ z1[:m]) + float(self.cu @ z1[m:])) / denom
        dy = z1[:m] + dtau * z2[:m]
        du = z1[m:] + dtau * z2[m:]
        atdy = self.inst.adjoint(dy)
        ds = [
            eta * r - a + c * dtau
            for r, a, c in zip(self.rd, atdy, self.c_blocks, strict=True)
        ]
        dx = [
            gi - dtau * wc + w @ a @ w
            for gi, wc, w, a in zip(g, self.wcw, self.ws, atdy, strict=True)
        ]
        dkappa = (sigma * self.mu - self.tau * self.kappa - self.kappa * dtau) / self.tau
        return _Direction(
            [0.5 * (d + d.T) for d in dx],
            dy,
            du,
            [0.5 * (d + d.T) for d in ds],
            dtau,
            dkappa,
        )

    def step_length(self, step: _Direction) -> float:
        alphas = [_max_step(x, d) for x, d in zip(self.xs, step.dx, strict=True)]
        alphas += [_max_step(s, d) for s, d in zip(self.ss, step.ds, strict=True)]
        alphas += [_scalar_step(self.tau, step.dtau), _scalar_step(self.kappa, step.dkappa)]
        return min(alphas)


def solve_feasibility(inst: SdpInstance, opts: SdpOptions | None = None) -> SdpSolution:
    """Solve ``inst``; status Feasible, Infeasible (verified ray) or Unknown."""
    opts = opts or SdpOptions()
    tol = opts.feas_tol
    started = time.perf_counter()
    if inst.num_constraints == 0:
        return _zero_solution(inst)

    m = inst.num_constraints
    k = inst.num_free
    b = inst.rhs
    c_blocks = list(inst.objective) if inst.objective is not None else [
        np.zeros((d, d)) for d in inst.block_dims
    ]
    bmat = inst.free_columns if inst.free_columns is not None else np.zeros((m, 0))
    cu = inst.free_objective if inst.free_objective is not None else np.zeros(k)
    total_dim = sum(inst.block_dims)
    norm_b = float(np.max(np.abs(b)))
    norm_c = float(np.sqrt(_inner(c_blocks, c_blocks)) + np.linalg.norm(cu))

    xs = [np.eye(d) for d in inst.block_dims]
    ss = [np.eye(d) for d in inst.block_dims]
    y = np.zeros(m)
    u = np.zeros(k)
    tau = kappa = 1.0

    status = SdpStatus.UNKNOWN
    ray: FloatArray | None = None
    reason = "max_iter"
    metrics: dict[str, Any] = {}
    iteration = 0

    for iteration in range(1, opts.max_iter + 1):
        ax = inst.apply(xs)
        aty = inst.adjoint(y)
        rp = b * tau - ax - bmat @ u
        rd = [c * tau - a - s for c, a, s in zip(c_blocks, aty, ss, strict=True)]
        ru = cu * tau - bmat.T @ y
        pobj = _inner(c_blocks, xs) + float(cu @ u)
        dobj = float(b @ y)
        rg = kappa + pobj - dobj
        mu = (_inner(xs, ss) + tau * kappa) / (total_dim + 1)

        pres = float(np.max(np.abs(rp))) / tau / (1.0 + norm_b)
        dres = (
            float(np.sqrt(_inner(rd, rd)) + np.linalg.norm(ru)) / tau / (1.0 + norm_c)
        )
        gap = abs(pobj - dobj) / tau / (1.0 + abs(pobj / tau) + abs(dobj / tau))
        metrics = {
            "iterations": iteration - 1,
            "primal_residual": pres,
            "dual_residual": dres,
            "gap": gap,
            "tau": tau,
            "kappa": kappa,
            "mu": mu,
            "primal_objective": pobj / tau,
            "dual_objective": dobj / tau,
        }
        log_event(logger, "sdp.iteration", logging.DEBUG, **metrics)

        if pres <= tol and dres <= tol and gap <= tol:
            status = SdpStatus.FEASIBLE
            reason = "converged"
            break

        if dobj > 0:
            if _prescreen_ray(inst, -y, tol):
                check = verify_dual_ray(inst, -y, tol)
                if check.ok:
                    status = SdpStatus.INFEASIBLE
                    ray = -y / max(float(np.linalg.norm(y)), np.finfo(float).tiny)
                    reason = "dual_ray"
                    metrics.update(ray_margin=check.margin, ray_min_eigenvalue=check.min_eigenvalue)
                    break

        if tau < 1e-13 * max(1.0, kappa):
            reason = "tau_vanished"
            if pobj < 0:
                metrics["dual_infeasible"] = True
            break

        try:
            scalings = [_nt_scaling(x, s) for x, s in zip(xs, ss, strict=True)]
        except np.linalg.LinAlgError:
            reason = "cholesky_breakdown"
            break
        ws = [w for w, _ in scalings]
        s_invs = [si for _, si in scalings]

        schur = _schur(inst, ws)
        kkt = np.zeros((m + k, m + k))
        kkt[:m, :m] = schur
        kkt[:m, m:] = bmat
        kkt[m:, :m] = bmat.T

        wcw = [w @ c @ w for w, c in zip(ws, c_blocks, strict=True)]
        a_vec = inst.apply(wcw)
        wcw_c = _inner(wcw, c_blocks)
        w_rd_w = [w @ r @ w for w, r in zip(ws, rd, strict=True)]

        # h1 = eta (rp + A(W rd W)) - sigma mu A(S^-1) + A(X); solve all parts at once
        rhs_cols = np.zeros((m + k, 4))
        rhs_cols[:m, 0] = rp + inst.apply(w_rd_w)
        rhs_cols[m:, 0] = ru
        rhs_cols[:m, 1] = -mu * inst.apply(s_invs)
        rhs_cols[:m, 2] = ax
        rhs_cols[:m, 3] = a_vec + b
        rhs_cols[m:, 3] = cu
        sol = _solve_kkt(kkt, rhs_cols)
        if not np.all(np.isfinite(sol)):
            reason = "linear_solve_breakdown"
            break

        newton = _NewtonSystem(
            inst, sol, xs, ss, ws, s_invs, w_rd_w, wcw, rd, c_blocks,
            a_vec, cu, wcw_c, rg, mu, tau, kappa,
        )
        try:
            aff = newton.direction(0.0, 1.0)
            alpha_aff = min(1.0, newton.step_length(aff))
            mu_aff = (
                _inner(
                    [x + alpha_aff * d for x, d in zip(xs, aff.dx, strict=True)],
                    [s + alpha_aff * d for s, d in zip(ss, aff.ds, strict=True)],
                )
                + (tau + alpha_aff * aff.dtau) * (kappa + alpha_aff * aff.dkappa)
            ) / (total_dim + 1)
            sigma = float(np.clip((mu_aff / mu) ** 3, 0.0, 1.0))
            step = newton.direction(sigma, 1.0 - sigma)
            alpha = min(1.0, STEP_FRACTION * newton.step_length(step))
        except np.linalg.LinAlgError:
            reason = "step_breakdown"
            break
        if not np.isfinite(alpha) or alpha < MIN_STEP:
            reason = "step_too_small"
            break

        xs = [x + alpha * d for x, d in zip(xs, step.dx, strict=True)]
        ss = [s + alpha * d for s, d in zip(ss, step.ds, strict=True)]
        y = y + alpha * step.dy
        u = u + alpha * step.du
        tau += alpha * step.dtau
        kappa += alpha * step.dkappa

    primal = [x / tau for x in xs]
    metrics["iterations"] = iteration
    metrics["min_eigenvalues"] = [float(np.linalg.eigvalsh(x)[0]) for x in primal]
    metrics["reason"] = reason
    metrics["elapsed_ms"] = round((time.perf_counter() - started) * 1000.0, 3)
    log_event(
        logger,
        "sdp.finished",
        status=status.value,
        iterations=iteration,
        reason=reason,
        constraints=m,
        blocks=list(inst.block_dims),
    )
    return SdpSolution(
        status=status,
        primal=primal,
        dual=y / tau,
        free=u / tau,
        dual_ray=ray,
        metrics=metrics,
    )


def _prescreen_ray(inst: SdpInstance, z: FloatArray, tol: float) -> bool:
    """Cheap LAPACK screen before the Jacobi verification."""
    blocks = inst.adjoint(z)
    size = float(np.sqrt(sum(float(np.sum(bl * bl)) for bl in blocks)))
    if size <= 1e-14 * max(1.0, float(np.linalg.norm(z))):
        size = float(np.linalg.norm(z)) or 1.0
    if -float(inst.rhs @ z) / size < RAY_MARGIN_FACTOR * tol:
        return False
    return all(float(np.linalg.eigvalsh(bl / size)[0]) >= -tol for bl in blocks)
