"""Unit tests for scalar and matrix polynomial arithmetic."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from matrix_certifier.errors import DimensionMismatch, InputError, NonFiniteInput
from matrix_certifier.polycore import (
    MatrixPoly,
    ScalarPoly,
    congruence,
    monomials_up_to,
    mul,
    substitute_matrix,
)

MONOS = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]

scalar_polys = st.dictionaries(st.sampled_from(MONOS), st.integers(-3, 3), max_size=4).map(
    lambda terms: ScalarPoly(2, terms)
)


def matrices(t: int) -> st.SearchStrategy[MatrixPoly]:
    return st.lists(scalar_polys, min_size=t * t, max_size=t * t).map(
        lambda ps: MatrixPoly([ps[i * t : (i + 1) * t] for i in range(t)], 2)
    )


class TestScalarRing:
    @pytest.mark.unit
    @given(scalar_polys, scalar_polys, scalar_polys)
    @settings(max_examples=50, deadline=None)
    def test_ring_axioms(self, p, q, r):
        assert p + q == q + p
        assert p * q == q * p
        assert (p * q) * r == p * (q * r)
        assert p * (q + r) == p * q + p * r
        assert p - p == ScalarPoly.zero(2)

    @pytest.mark.unit
    def test_zero_coefficients_are_dropped(self):
        p = ScalarPoly(1, {(1,): 2, (0,): 0})
        assert dict(p.terms) == {(1,): Fraction(2)}
        assert (p - p).is_zero

    @pytest.mark.unit
    def test_exact_divide(self):
        x = ScalarPoly.variable(1, 0)
        assert (x * x - 1).exact_divide(x - 1) == x + 1
        with pytest.raises(InputError):
            (x * x + 1).exact_divide(x - 1)

    @pytest.mark.unit
    def test_mismatched_variable_counts_raise(self):
        with pytest.raises(DimensionMismatch):
            ScalarPoly.variable(1, 0) + ScalarPoly.variable(2, 0)

    @pytest.mark.unit
    def test_non_finite_coefficient_rejected(self):
        with pytest.raises(NonFiniteInput):
            ScalarPoly.constant(1, float("nan"))

    @pytest.mark.unit
    def test_exact_evaluation(self):
        x, y = ScalarPoly.variable(2, 0), ScalarPoly.variable(2, 1)
        p = x * x * y + Fraction(1, 3)
        assert p.evaluate([Fraction(1, 2), 3]) == Fraction(3, 4) + Fraction(1, 3)

    @pytest.mark.unit
    def test_monomial_count(self):
        assert len(monomials_up_to(2, 3)) == 10
        assert monomials_up_to(2, 1) == [(0, 0), (1, 0), (0, 1)]


class TestMatrixPoly:
    @pytest.mark.unit
    @given(matrices(2), matrices(2), matrices(2))
    @settings(max_examples=30, deadline=None)
    def test_product_is_associative(self, a, b, c):
        assert mul(mul(a, b), c) == mul(a, mul(b, c))

    @pytest.mark.unit
    @given(matrices(2), matrices(2))
    @settings(max_examples=30, deadline=None)
    def test_congruence_matches_adjoint_product(self, c, f):
        assert congruence(c, f) == mul(mul(c.adjoint(), f), c)

    @pytest.mark.unit
    @given(matrices(3))
    @settings(max_examples=20, deadline=None)
    def test_adjugate_identity(self, a):
        det = a.determinant()
        assert mul(a, a.adjugate()) == MatrixPoly.scalar_identity(det, 3)

    @pytest.mark.unit
    def test_evaluate_many_matches_pointwise(self):
        x, y = ScalarPoly.variable(2, 0), ScalarPoly.variable(2, 1)
        f = MatrixPoly([[x * y, x + 1], [x + 1, y * y]], 2)
        pts = np.array([[0.5, -1.0], [2.0, 3.0]])
        batch = f.evaluate_many(pts)
        for p, row in enumerate(pts):
            np.testing.assert_allclose(batch[p], f.evaluate(list(row)))

    @pytest.mark.unit
    def test_rectangular_product(self):
        x = ScalarPoly.variable(1, 0)
        g = MatrixPoly([[x, ScalarPoly.constant(1, 1)]], 1)
        gram = mul(g.adjoint(), g)
        assert gram.shape == (2, 2)
        assert gram[0, 1] == x

    @pytest.mark.unit
    def test_symmetry_and_diagonal_checks(self, symbolic_2x2):
        assert symbolic_2x2.is_symmetric()
        assert not symbolic_2x2.is_diagonal()
        assert MatrixPoly.identity(3, 2).scalar_part() == ScalarPoly.constant(3, 1)

    @pytest.mark.unit
    def test_substitute_characteristic_polynomial(self):
        # q(Y) = Y^2 + 1 annihilates the rotation by a right angle
        one, zero = ScalarPoly.constant(1, 1), ScalarPoly.zero(1)
        f = MatrixPoly([[zero, -one], [one, zero]], 1)
        y = ScalarPoly.variable(2, 1)
        assert substitute_matrix(y * y + 1, f).is_zero

    @pytest.mark.unit
    def test_ragged_grid_rejected(self):
        x = ScalarPoly.variable(1, 0)
        with pytest.raises(DimensionMismatch):
            MatrixPoly([[x, x], [x]], 1)
