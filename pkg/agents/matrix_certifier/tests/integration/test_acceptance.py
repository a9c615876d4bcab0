"""End-to-end acceptance properties over randomized and bundled instances."""

from fractions import Fraction

import numpy as np
import pytest

from matrix_certifier.certify import (
    ArchWitness,
    Verdict,
    archimedean_witness,
    find_membership,
    find_nnsd_certificate,
    real_eigenvalue_certificate,
    trace_reduce,
)
from matrix_certifier.diag import check_equivalence, diagonalize_branching, sample_points
from matrix_certifier.gram import ModulePresentation, verify_certificate
from matrix_certifier.polycore import MatrixPoly, ScalarPoly, congruence, monomials_up_to, mul
from matrix_certifier.states import NotExtractable, PointVectorPair, extract_point, mix_states, synthesize_state
from matrix_certifier.univar import exact_residual, jakubovic_factor
from matrix_certifier.wire import read_matrix

from ..conftest import const, var


def _random_scalar(rng: np.random.Generator, n: int, deg: int) -> ScalarPoly:
    monos = monomials_up_to(n, deg)
    return ScalarPoly(n, {m: int(c) for m, c in zip(monos, rng.integers(-3, 4, size=len(monos)), strict=True)})


def _random_symmetric(rng: np.random.Generator, n: int, t: int, deg: int) -> MatrixPoly:
    grid = [[ScalarPoly.zero(n) for _ in range(t)] for _ in range(t)]
    for i in range(t):
        for j in range(i, t):
            grid[i][j] = grid[j][i] = _random_scalar(rng, n, deg)
    return MatrixPoly(grid, n)


class TestTraceDeterminantIdentity:
    @pytest.mark.integration
    def test_four_fresh_variables(self):
        # the fourth variable is unused by f and must not disturb the identity
        a, b, c = var(4, 0), var(4, 1), var(4, 2)
        f = MatrixPoly([[a, b], [b, c]], 4)
        one, zero = const(4, 1), const(4, 0)
        c1 = MatrixPoly([[one, -b], [zero, a]], 4)
        c2 = MatrixPoly([[zero, c], [one, -b]], 4)
        tr = a + c
        rhs = MatrixPoly.diagonal([tr, tr * (a * c - b * b)])
        assert (congruence(c1, f) + congruence(c2, f) - rhs).is_zero


class TestJakubovicRoundTrip:
    @pytest.mark.integration
    @pytest.mark.slow
    def test_random_squares(self, exact_config):
        rng = np.random.default_rng(2024)
        exact = 0
        runs = 50
        for _ in range(runs):
            t = int(rng.integers(1, 5))
            deg = int(rng.integers(0, 4))
            rows = [[_random_scalar(rng, 1, deg) for _ in range(t)] for _ in range(t + 1)]
            g = MatrixPoly(rows, 1)
            f = mul(g.adjoint(), g)
            if f.is_zero:
                continue
            result = jakubovic_factor(f, exact_config)
            assert result.residual <= 1e-7 * max(1.0, f.max_abs_coefficient())
            if result.exact and exact_residual(f, result).is_zero:
                exact += 1
        assert exact >= 0.8 * runs


class TestMotzkinSeparation:
    @pytest.mark.integration
    @pytest.mark.slow
    def test_ray_state_is_nonnegative_on_squares(self, examples_dir, numeric_config):
        f = read_matrix(examples_dir / "motzkin.json")
        outcome = find_membership(f, ModulePresentation(2, 1), 3, numeric_config, extract=False)
        assert outcome.verdict is Verdict.SEPARATED
        state = outcome.state
        assert state is not None and state.value < 0
        rng = np.random.default_rng(6)
        monos = monomials_up_to(2, 3)
        for _ in range(100):
            coeffs = rng.normal(size=len(monos))
            coeffs /= np.linalg.norm(coeffs)
            s = ScalarPoly(2, dict(zip(monos, coeffs.tolist(), strict=True)))
            assert state.apply(MatrixPoly.from_scalar(s * s)) >= -1e-6


class TestNowhereNegativeSemidefinite:
    @pytest.mark.integration
    def test_diagonal_on_interval(self, exact_config):
        x = var(1, 0)
        f = MatrixPoly.diagonal([x + 2, const(1, -1)])
        pres = ModulePresentation.scalar(1, 2, [1 - x * x])
        outcome = find_nnsd_certificate(f, pres, 2, exact_config, assume_archimedean=True)
        assert outcome.verdict is Verdict.FOUND
        assert outcome.transformers
        rearranged = outcome.rearranged
        assert rearranged is not None and rearranged.exact
        assert rearranged.residual is not None and rearranged.residual.passed

    @pytest.mark.integration
    def test_ball_generator_admits_transformers(self, examples_dir, exact_config):
        # diag(X1, X2, X1 X2 + 1) has no transformers without generators; the unit ball supplies them
        f = read_matrix(examples_dir / "counterexample.json")
        x, y = var(2, 0), var(2, 1)
        pres = ModulePresentation.scalar(2, 3, [1 - x * x - y * y])
        outcome = find_nnsd_certificate(f, pres, 4, exact_config, assume_archimedean=True)
        assert outcome.verdict is Verdict.FOUND
        assert outcome.degree <= 4
        assert outcome.transformers
        rearranged = outcome.rearranged
        assert rearranged is not None and rearranged.exact
        assert verify_certificate(rearranged, "exact").passed


class TestArchimedeanBall:
    @pytest.mark.integration
    @pytest.mark.parametrize(("n", "t"), [(1, 1), (2, 2), (3, 1)])
    def test_unit_ball(self, exact_config, n, t):
        sq = ScalarPoly.zero(n)
        for i in range(n):
            sq = sq + var(n, i) ** 2
        pres = ModulePresentation.scalar(n, t, [1 - sq])
        witness = archimedean_witness(pres, 8, 2, exact_config)
        assert isinstance(witness, ArchWitness)
        assert witness.n_bound == 1
        assert verify_certificate(witness.certificate, "exact").passed


class TestPureStates:
    @pytest.mark.integration
    def test_round_trip_and_mixtures(self):
        rng = np.random.default_rng(17)
        refused = 0
        for _ in range(100):
            n, t = int(rng.integers(1, 4)), int(rng.integers(1, 5))
            x = rng.uniform(-1.0, 1.0, size=n) / np.sqrt(n)
            v = rng.normal(size=t)
            found = extract_point(synthesize_state(x, v, 2))
            assert isinstance(found, PointVectorPair)
            np.testing.assert_allclose(found.x, x, atol=1e-6)

            y = rng.uniform(-1.0, 1.0, size=n) / np.sqrt(n)
            w = rng.normal(size=t)
            mixed = mix_states([synthesize_state(x, v, 2), synthesize_state(y, w, 2)], [0.5, 0.5])
            refused += isinstance(extract_point(mixed), NotExtractable)
        assert refused >= 95


class TestRealEigenvalues:
    @pytest.mark.integration
    def test_rotation(self, examples_dir, exact_config):
        f = read_matrix(examples_dir / "rotation.json")
        x = var(1, 0)
        outcome = real_eigenvalue_certificate(f, [1 - x * x], 2, exact_config, assume_archimedean=True)
        assert outcome.verdict is Verdict.FOUND
        assert outcome.substitution_residual is not None
        assert outcome.substitution_residual.is_zero


class TestDiagonalizationSoundness:
    @pytest.mark.integration
    @pytest.mark.slow
    def test_random_symmetric(self):
        rng = np.random.default_rng(99)
        for _ in range(100):
            n, t = int(rng.integers(1, 3)), int(rng.integers(2, 5))
            f = _random_symmetric(rng, n, t, 2)
            branches = diagonalize_branching(f, branch_cap=10_000)
            assert all(b.check(f) for b in branches)
            report = check_equivalence(f, branches, sample_points(n, 1000, 2.0, int(rng.integers(0, 2**31))))
            assert report.violations == 0, report.first_violation


class TestTraceReduction:
    @pytest.mark.integration
    @pytest.mark.slow
    def test_scalar_generator_certificates(self, exact_config):
        rng = np.random.default_rng(5)
        x = var(1, 0)
        pres = ModulePresentation.scalar(1, 2, [1 - x * x])
        for _ in range(20):
            r = Fraction(int(rng.integers(-3, 4)), int(rng.integers(1, 4)))
            shift = abs(r) + Fraction(int(rng.integers(1, 5)))
            s = x * x + x * int(rng.integers(-1, 2)) + shift + 1
            f = MatrixPoly([[s, const(1, r)], [const(1, r), s + 1]], 1)
            outcome = find_membership(f, pres, 2, exact_config)
            assert outcome.verdict is Verdict.FOUND and outcome.certificate is not None
            reduced = trace_reduce(outcome.certificate)
            assert reduced.exact
            assert reduced.residual is not None and reduced.residual.passed
            assert reduced.target == MatrixPoly.from_scalar((s + s + 1).scale(Fraction(1, 2)))
