"""Unit tests for univariate matrix factorization f = g^T g."""

import numpy as np
import pytest

from matrix_certifier.errors import DimensionMismatch, NotPsdOnLine
from matrix_certifier.polycore import MatrixPoly
from matrix_certifier.univar import (
    check_psd_on_line,
    evaluation_error,
    exact_residual,
    jakubovic_factor,
    max_rows,
)

from ..conftest import const, var


@pytest.fixture
def square() -> MatrixPoly:
    """g^T g with g = [[X, 1], [0, X]]."""
    x = var(1, 0)
    return MatrixPoly([[x * x, x], [x, x * x + 1]], 1)


class TestJakubovicFactor:
    @pytest.mark.unit
    def test_factors_a_square(self, square, numeric_config):
        result = jakubovic_factor(square, numeric_config)
        assert result.g.cols == 2
        assert result.g.rows <= max_rows(square) == 4
        assert result.residual < 1e-6
        assert evaluation_error(square, result.g, np.linspace(-3.0, 3.0, 25)) < 1e-6

    @pytest.mark.unit
    def test_exact_rows_reproduce_target(self, square, exact_config):
        shifted = square + MatrixPoly.identity(1, 2)
        result = jakubovic_factor(shifted, exact_config)
        assert result.exact
        assert exact_residual(shifted, result).is_zero

    @pytest.mark.unit
    def test_constant_matrix(self, numeric_config):
        f = MatrixPoly([[const(1, 2), const(1, 1)], [const(1, 1), const(1, 2)]], 1)
        result = jakubovic_factor(f, numeric_config)
        gv = result.g.evaluate([0.0])
        np.testing.assert_allclose(gv.T @ gv, [[2.0, 1.0], [1.0, 2.0]], atol=1e-6)

    @pytest.mark.unit
    def test_negative_on_interval(self, numeric_config):
        x = var(1, 0)
        f = MatrixPoly.diagonal([x * x - 1, const(1, 1)])
        with pytest.raises(NotPsdOnLine) as info:
            jakubovic_factor(f, numeric_config)
        assert info.value.min_eigenvalue < 0
        assert abs(info.value.witness) < 1.0

    @pytest.mark.unit
    def test_multivariate_rejected(self, symbolic_2x2):
        with pytest.raises(DimensionMismatch):
            jakubovic_factor(symbolic_2x2)


class TestCheckPsdOnLine:
    @pytest.mark.unit
    def test_odd_degree(self):
        f = MatrixPoly.diagonal([var(1, 0), const(1, 1)])
        with pytest.raises(NotPsdOnLine, match="odd"):
            check_psd_on_line(f)

    @pytest.mark.unit
    def test_negative_leading_coefficient(self):
        x = var(1, 0)
        f = MatrixPoly.diagonal([1 - x * x, const(1, 1)])
        with pytest.raises(NotPsdOnLine, match="leading"):
            check_psd_on_line(f)

    @pytest.mark.unit
    def test_psd_passes(self, square):
        check_psd_on_line(square)
