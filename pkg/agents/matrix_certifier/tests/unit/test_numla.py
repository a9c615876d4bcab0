"""Unit tests for eigen solver, PSD factorization, LU and exact LDL^T."""

from fractions import Fraction

import numpy as np
import pytest

from matrix_certifier.errors import IndefiniteInput, SingularSystem
from matrix_certifier.numla import (
    exact_ldlt,
    is_psd_exact,
    min_eigenvalue,
    pack_lower,
    psd_factor,
    solve_linear,
    sym_eigen,
    unpack_lower,
)


@pytest.fixture
def spd() -> np.ndarray:
    rng = np.random.default_rng(11)
    b = rng.normal(size=(6, 6))
    return b @ b.T + 0.1 * np.eye(6)


class TestSymEigen:
    @pytest.mark.unit
    def test_matches_lapack(self, spd):
        w, v = sym_eigen(spd)
        np.testing.assert_allclose(w, np.linalg.eigvalsh(spd), rtol=1e-10, atol=1e-10)
        np.testing.assert_allclose(v.T @ v, np.eye(6), atol=1e-10)
        np.testing.assert_allclose(v @ np.diag(w) @ v.T, spd, atol=1e-9)

    @pytest.mark.unit
    def test_ascending_order(self):
        w, _ = sym_eigen(np.diag([3.0, -1.0, 2.0]))
        assert list(w) == pytest.approx([-1.0, 2.0, 3.0])

    @pytest.mark.unit
    def test_empty(self):
        w, v = sym_eigen(np.zeros((0, 0)))
        assert w.size == 0 and v.shape == (0, 0)


class TestPsdFactor:
    @pytest.mark.unit
    def test_reconstructs_low_rank(self):
        rng = np.random.default_rng(3)
        b = rng.normal(size=(2, 5))
        fac = psd_factor(b.T @ b)
        assert fac.rank == 2
        np.testing.assert_allclose(fac.factor.T @ fac.factor, b.T @ b, atol=1e-9)

    @pytest.mark.unit
    def test_indefinite_raises(self):
        with pytest.raises(IndefiniteInput):
            psd_factor(np.diag([1.0, -0.5]))

    @pytest.mark.unit
    def test_tiny_negative_eigenvalue_is_clamped(self):
        fac = psd_factor(np.diag([1.0, -1e-12]))
        assert fac.rank == 1
        assert fac.clamped == pytest.approx(1e-12)

    @pytest.mark.unit
    def test_min_eigenvalue(self):
        assert min_eigenvalue([[2.0, 1.0], [1.0, 2.0]]) == pytest.approx(1.0)


class TestSolveLinear:
    @pytest.mark.unit
    def test_solves(self, spd):
        x = np.arange(6.0)
        np.testing.assert_allclose(solve_linear(spd, spd @ x), x, atol=1e-8)

    @pytest.mark.unit
    def test_singular_raises(self):
        with pytest.raises(SingularSystem):
            solve_linear([[1.0, 2.0], [2.0, 4.0]], [1.0, 2.0])


class TestExactLdl:
    @pytest.mark.unit
    def test_psd_with_zero_pivot(self):
        a = [[Fraction(1), Fraction(1)], [Fraction(1), Fraction(1)]]
        ldl = exact_ldlt(a)
        assert ldl.psd
        assert ldl.d == [Fraction(1), Fraction(0)]

    @pytest.mark.unit
    def test_indefinite(self):
        assert not is_psd_exact([[Fraction(0), Fraction(1)], [Fraction(1), Fraction(0)]])
        assert not is_psd_exact([[Fraction(1), Fraction(2)], [Fraction(2), Fraction(1)]])

    @pytest.mark.unit
    def test_rational_pivots(self):
        a = [[Fraction(2), Fraction(1)], [Fraction(1), Fraction(2)]]
        assert exact_ldlt(a).d == [Fraction(2), Fraction(3, 2)]


class TestPacking:
    @pytest.mark.unit
    def test_lower_triangle_packing(self):
        a = np.array([[1.0, 2.0, 4.0], [2.0, 3.0, 5.0], [4.0, 5.0, 6.0]])
        packed = pack_lower(a)
        assert packed.size == 6
        np.testing.assert_allclose(unpack_lower(packed, 3), a)
