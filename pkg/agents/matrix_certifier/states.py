"""Separating states and point-vector extraction.

A state is stored by its values on the coefficient basis: ``moments[(d, k, l)]``
is L(X^d (E_kl + E_lk)) for k < l and L(X^d E_kk) on the diagonal, so that
L(q) is the plain dot product with the coefficients of q.  The point
evaluation at (x, v) has moment matrices Y_d = x^d v v^T.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import DimensionMismatch, InputError, RayNotVerifiable
from .gram import BlockSpec, GramProblem, Key, ModulePresentation, block_layout, key_order, target_coefficients
from .numla import min_eigenvalue, sym_eigen
from .observability import get_logger, log_event
from .polycore import MatrixPoly, Monomial, monomials_up_to, unit_monomial
from .sdp import SdpSolution, SdpStatus

logger = get_logger(__name__)

RAY_TINY = 1e-12
SELECT_FRACTION = 0.1


@dataclass(frozen=True)
class SeparatingState:
    n: int
    t: int
    degree: int
    moments: Mapping[Key, float]
    value: float = 0.0
    slacks: tuple[float, ...] = ()

    def moment_matrix(self, mono: Monomial) -> np.ndarray:
        """Y_mono with Y[k, k] = L(X^mono E_kk) and halved off-diagonal values."""
        y = np.zeros((self.t, self.t))
        for k in range(self.t):
            for l in range(k, self.t):  # noqa: E741
                v = self.moments.get((mono, k, l), 0.0)
                if k == l:
                    y[k, k] = v
                else:
                    y[k, l] = y[l, k] = v / 2.0
        return y

    def apply(self, q: MatrixPoly) -> float:
        """L(q); ``q`` must lie in the truncation."""
        if q.n != self.n or q.shape != (self.t, self.t):
            raise DimensionMismatch("polynomial does not match the state's shape")
        total = 0.0
        for key, c in target_coefficients(q).items():
            if key not in self.moments:
                if sum(key[0]) > 2 * self.degree:
                    raise InputError(
                        f"degree {sum(key[0])} exceeds the state's truncation {2 * self.degree}"
                    )
                continue
            total += float(c) * self.moments[key]
        return total

    @property
    def normalization(self) -> float:
        zero = (0,) * self.n
        return float(sum(self.moments.get((zero, k, k), 0.0) for k in range(self.t)))


@dataclass(frozen=True)
class PointVectorPair:
    x: tuple[float, ...]
    v: tuple[float, ...]


@dataclass(frozen=True)
class NotExtractable:
    reason: str
    details: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class PointReport:
    value: float
    generator_min_eigenvalues: tuple[float, ...]
    equality_values: tuple[float, ...]
    in_region: bool
    separates: bool

    @property
    def passed(self) -> bool:
        return self.in_region and self.separates


# =============================================================================
# CONSTRUCTION
# =============================================================================


def _sign_normalize(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    for value in v:
        if abs(value) > 1e-12:
            return v if value > 0 else -v
    return v


def synthesize_state(x: Sequence[float], v: Sequence[float], degree: int) -> SeparatingState:
    """Evaluation state q -> <q(x) v, v> truncated at 2 * degree."""
    xs = np.asarray(x, dtype=float)
    vs = np.asarray(v, dtype=float)
    norm = float(np.linalg.norm(vs))
    if norm == 0.0:
        raise InputError("vector must be nonzero")
    vs = vs / norm
    n, t = xs.size, vs.size
    moments: dict[Key, float] = {}
    for mono in monomials_up_to(n, 2 * degree):
        power = float(np.prod(xs ** np.asarray(mono, dtype=float))) if n else 1.0
        for k in range(t):
            for l in range(k, t):  # noqa: E741
                moments[(mono, k, l)] = power * vs[k] * vs[l] * (1.0 if k == l else 2.0)
    return SeparatingState(n, t, degree, moments)


def mix_states(states: Sequence[SeparatingState], weights: Sequence[float]) -> SeparatingState:
    if not states or len(states) != len(weights):
        raise InputError("need one weight per state")
    first = states[0]
    if any((s.n, s.t, s.degree) != (first.n, first.t, first.degree) for s in states):
        raise DimensionMismatch("states must share shape and degree")
    total = float(sum(weights))
    moments: dict[Key, float] = {}
    for s, w in zip(states, weights, strict=True):
        for key, val in s.moments.items():
            moments[key] = moments.get(key, 0.0) + w * val / total
    return SeparatingState(first.n, first.t, first.degree, moments)


def state_from_moments(
    n: int, t: int, degree: int, moments: Mapping[Key, float], value: float = 0.0
) -> SeparatingState:
    for mono, k, l in moments:  # noqa: E741
        if len(mono) != n or not 0 <= k <= l < t:
            raise DimensionMismatch(f"invalid moment key {(mono, k, l)}")
    return SeparatingState(n, t, degree, dict(moments), value)


def localizing_matrix(spec: BlockSpec, moments: Mapping[Key, float]) -> np.ndarray:
    """Matrix of the functional on one Gram block: L(block(Q)) = <M, Q>."""
    out = np.zeros((spec.size, spec.size))
    for key, pairs in block_layout(spec).items():
        z = moments.get(key, 0.0)
        if z == 0.0:
            continue
        for i, j, coef in pairs:
            c = 0.5 * float(coef) * z
            out[i, j] += c
            out[j, i] += c
    return out


def state_from_dual(sol: SdpSolution, problem: GramProblem, feas_tol: float = 1e-8) -> SeparatingState:
    """Normalized state from a verified ray or from an optimal lower-bound dual.

    The state must be nonnegative on every Gram block of the module up to
    10 * feas_tol relative to the localizing matrix.
    """
    if sol.status is SdpStatus.INFEASIBLE and sol.dual_ray is not None:
        z = np.asarray(sol.dual_ray, dtype=float)
    elif problem.lower_bound and sol.status is SdpStatus.FEASIBLE:
        z = -np.asarray(sol.dual, dtype=float)
    else:
        raise RayNotVerifiable(f"solution with status {sol.status.value} carries no ray")
    moments = {key: float(v) for key, v in zip(problem.keys, z, strict=True)}
    f = problem.target
    zero = (0,) * f.n
    norm = sum(moments.get((zero, k, k), 0.0) for k in range(f.t))
    if norm <= RAY_TINY * max(1.0, float(np.max(np.abs(z)))):
        raise RayNotVerifiable("state vanishes on the identity", normalization=norm)
    moments = {key: v / norm for key, v in moments.items()}
    local = [localizing_matrix(spec, moments) for spec in problem.blocks]
    slacks = tuple(min_eigenvalue(m) for m in local)
    for index, (m, slack) in enumerate(zip(local, slacks, strict=True)):
        if slack < -10.0 * feas_tol * max(1.0, float(np.linalg.norm(m))):
            raise RayNotVerifiable("state is negative on the module", block=index, slack=slack)
    state = SeparatingState(f.n, f.t, problem.degree, moments, 0.0, slacks)
    value = state.apply(f)
    return SeparatingState(f.n, f.t, problem.degree, moments, value, slacks)


# =============================================================================
# EXTRACTION
# =============================================================================


def extract_point(
    state: SeparatingState, tol: float = 1e-5, rank_one_ratio: float = 1e-4
) -> PointVectorPair | NotExtractable:
    """Recover (x, v) with L(p) = <p(x) v, v>, or report why not."""
    n, t = state.n, state.t
    zero = (0,) * n
    v_mat = state.moment_matrix(zero)
    w, vecs = sym_eigen(v_mat)
    top = float(w[-1])
    if top <= 0.0:
        return NotExtractable("zero-degree moment matrix vanishes")
    if w[0] < -tol * top:
        return NotExtractable("zero-degree moment matrix is not PSD", {"min_eigenvalue": float(w[0])})
    if t > 1 and w[-2] / top > rank_one_ratio:
        return NotExtractable("zero-degree moment matrix is not rank one", {"ratio": float(w[-2] / top)})
    v = _sign_normalize(vecs[:, -1])

    chosen = [j for j in range(t) if v[j] ** 2 > SELECT_FRACTION / t]
    denom = sum(v_mat[j, j] for j in chosen)
    if state.degree < 1:
        x = np.zeros(n)
    else:
        x = np.array(
            [
                sum(state.moment_matrix(unit_monomial(n, i))[j, j] for j in chosen) / denom
                for i in range(n)
            ]
        )
        sq = sum(
            sum(state.moment_matrix(tuple(2 * e for e in unit_monomial(n, i)))[j, j] for j in chosen)
            for i in range(n)
        ) / denom
        x_sq = float(x @ x)
        if abs(sq - x_sq) > tol * (1.0 + x_sq):
            return NotExtractable(
                "second moments disagree with the extracted point",
                {"second_moment": float(sq), "norm_squared": x_sq},
            )

    reference = synthesize_state(x, v, state.degree)
    top_degree = max(2 * state.degree - 2, min(2 * state.degree, 2))
    worst = 0.0
    scale = state.normalization or 1.0
    for key, expected in reference.moments.items():
        if sum(key[0]) > top_degree:
            continue
        got = state.moments.get(key, 0.0) / scale
        err = abs(got - expected)
        worst = max(worst, err / (1.0 + abs(expected)))
        if err > tol * (1.0 + abs(expected)):
            return NotExtractable(
                "moments do not match the extracted point",
                {"key": [list(key[0]), key[1], key[2]], "error": float(err)},
            )
    pair = PointVectorPair(tuple(float(c) for c in x), tuple(float(c) for c in v))
    log_event(logger, "states.extracted", logging.INFO, x=list(pair.x), v=list(pair.v), error=worst)
    return pair


def verify_point(
    pair: PointVectorPair, f: MatrixPoly, presentation: ModulePresentation, eps: float = 1e-6
) -> PointReport:
    """<f(x) v, v> and the generator eigenvalues at x; never raises on shape."""
    x = list(pair.x)
    v = np.asarray(pair.v, dtype=float)
    v = v / (np.linalg.norm(v) or 1.0)
    value = float(v @ f.evaluate(x) @ v)
    gens = tuple(min_eigenvalue(g.evaluate(x)) for g in presentation.generators)
    eqs = tuple(float(h.evaluate(x)) for h in presentation.equalities)
    in_region = all(lam >= -eps for lam in gens) and all(abs(e) <= eps for e in eqs)
    return PointReport(value, gens, eqs, in_region, value <= eps)


def sorted_moment_items(state: SeparatingState) -> list[tuple[Key, float]]:
    return sorted(state.moments.items(), key=lambda kv: key_order(kv[0]))
