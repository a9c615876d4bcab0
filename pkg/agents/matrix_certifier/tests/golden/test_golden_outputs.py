"""Golden tests: fixed outputs of the bundled instances."""

import json
from fractions import Fraction

import pytest

from matrix_certifier.certify import char_poly, constant_nnsd_witness
from matrix_certifier.cli import main
from matrix_certifier.polycore import MatrixPoly
from matrix_certifier.wire import MatrixPolyModel, matrix_from_model, read_matrix

from ..conftest import const, var


@pytest.fixture
def run(examples_dir, monkeypatch, capsys):
    monkeypatch.chdir(examples_dir)

    def _run(*argv):
        code = main(list(argv))
        return code, json.loads(capsys.readouterr().out)["output"]

    return _run


def _matrix(data) -> MatrixPoly:
    return matrix_from_model(MatrixPolyModel.model_validate(data))


class TestGoldenOutputs:
    @pytest.mark.golden
    def test_trace_determinant_certificate(self, run):
        code, output = run("verify", "trace_det_certificate.json", "--exact")
        assert code == 0
        residual = output["residual"]
        assert residual["mode"] == "exact"
        assert residual["passed"] is True
        assert residual["max_deviation"] == 0.0

    @pytest.mark.golden
    def test_diagonalize_symmetric_2x2(self, run):
        code, output = run("diagonalize", "symmetric_2x2.json", "--seed", "3")
        assert code == 0
        x, y = var(2, 0), var(2, 1)
        branches = output["branches"]
        assert [b["label"] for b in branches] == [["0", "1"], ["1", "0"]]
        assert _matrix(branches[0]["d"]) == MatrixPoly.diagonal([x, x * x * y - x])
        assert _matrix(branches[1]["d"]) == MatrixPoly.diagonal([y, x * y * y - y])
        assert _matrix(branches[0]["c"]) == MatrixPoly([[const(2, 1), const(2, -1)], [const(2, 0), x]], 2)
        assert output["congruence_verified"] is True

    @pytest.mark.golden
    def test_product_module_order(self, run):
        code, output = run("product-module", "-g", "interval.json", "-g", "x_plus_2.json")
        assert code == 0
        x = var(1, 0)
        assert output["count"] == 3
        got = [_matrix(p) for p in output["products"]]
        assert got == [
            MatrixPoly.from_scalar(1 - x * x),
            MatrixPoly.from_scalar(x + 2),
            MatrixPoly.from_scalar(2 + x - 2 * x * x - x * x * x),
        ]

    @pytest.mark.golden
    def test_factor_not_psd_witness(self, run):
        code, output = run("factor-univariate", "not_psd_on_line.json")
        assert code == 1
        assert output["psd_on_line"] is False
        assert output["min_eigenvalue"] < 0
        assert abs(output["witness"]) < 1.0

    @pytest.mark.golden
    def test_verify_point(self, run):
        code, output = run("verify-point", "pair_minus_x.json", "minus_x.json", "-g", "interval.json")
        assert code == 0
        assert output["value"] == pytest.approx(-1.0)
        assert output["generator_min_eigenvalues"] == pytest.approx([0.0])
        assert output["passed"] is True


class TestGoldenValues:
    @pytest.mark.golden
    def test_rotation_characteristic_polynomial(self, examples_dir):
        f = read_matrix(examples_dir / "rotation.json")
        y = var(2, 1)
        result = char_poly(f)
        assert result.q == y * y + 1
        assert result.kind == "characteristic"

    @pytest.mark.golden
    def test_constant_witness(self):
        witness = constant_nnsd_witness([[1, 0], [0, -5]])
        assert witness.weight == Fraction(1)
        assert witness.u == (Fraction(1), Fraction(0))
        assert witness.matrices == (
            ((Fraction(1), Fraction(0)), (Fraction(0), Fraction(0))),
            ((Fraction(0), Fraction(1)), (Fraction(0), Fraction(0))),
        )
