"""Unit tests for the JSON wire models."""

import json
from fractions import Fraction

import pytest

from matrix_certifier.errors import InputFormatError
from matrix_certifier.gram import ModulePresentation, verify_certificate
from matrix_certifier.polycore import MatrixPoly, ScalarPoly
from matrix_certifier.states import synthesize_state
from matrix_certifier.wire import (
    CertificateModel,
    MatrixPolyModel,
    NumberModel,
    PresentationModel,
    certificate_from_model,
    certificate_to_model,
    dump,
    matrix_from_model,
    matrix_to_model,
    presentation_from_model,
    read_certificate,
    read_matrix,
    read_model,
    state_from_model,
    state_to_model,
)

from ..conftest import var


class TestNumbers:
    @pytest.mark.unit
    def test_exact_and_float(self):
        assert NumberModel(num=-3, den=4).to_coeff() == Fraction(-3, 4)
        assert NumberModel(value=0.5).to_coeff() == 0.5

    @pytest.mark.unit
    @pytest.mark.parametrize(
        "payload",
        [{}, {"num": 1, "den": 1, "value": 1.0}, {"num": 1, "den": 0}],
    )
    def test_invalid(self, payload):
        with pytest.raises(ValueError):
            NumberModel(**payload)


class TestMatrixFiles:
    @pytest.mark.unit
    def test_read_example(self, examples_dir):
        f = read_matrix(examples_dir / "x_plus_2.json")
        assert f == MatrixPoly.from_scalar(var(1, 0) + 2)

    @pytest.mark.unit
    def test_rational_coefficients_survive(self):
        x = var(2, 0)
        f = MatrixPoly([[x * Fraction(1, 3), ScalarPoly.constant(2, Fraction(-7, 5))]], 2)
        model = MatrixPolyModel.model_validate(dump(matrix_to_model(f)))
        assert model.cols == 2
        assert matrix_from_model(model) == f

    @pytest.mark.unit
    def test_ragged_grid(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"n": 1, "t": 2, "entries": [[[]], [[], []]]}), encoding="utf-8")
        with pytest.raises(InputFormatError):
            read_matrix(path)

    @pytest.mark.unit
    def test_wrong_exponent_count(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(
            json.dumps({"n": 2, "t": 1, "entries": [[[{"monomial": [1], "num": 1, "den": 1}]]]}),
            encoding="utf-8",
        )
        with pytest.raises(InputFormatError):
            read_matrix(path)

    @pytest.mark.unit
    def test_not_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(InputFormatError):
            read_matrix(path)


class TestPresentation:
    @pytest.mark.unit
    def test_scalar_generators_are_lifted(self, examples_dir):
        pres = presentation_from_model(read_model(examples_dir / "ball_presentation.json", PresentationModel))
        x, y = var(2, 0), var(2, 1)
        assert pres == ModulePresentation.scalar(2, 2, [1 - x * x - y * y])


class TestCertificates:
    @pytest.mark.unit
    def test_trace_determinant_example(self, examples_dir):
        cert = read_certificate(examples_dir / "trace_det_certificate.json")
        assert cert.exact
        report = verify_certificate(cert, "exact")
        assert report.passed, report.message

    @pytest.mark.unit
    def test_model_round_trip_keeps_identity(self, examples_dir):
        cert = read_certificate(examples_dir / "trace_det_certificate.json")
        again = certificate_from_model(CertificateModel.model_validate(dump(certificate_to_model(cert))))
        assert again.reconstruct() == cert.reconstruct()
        assert verify_certificate(again, "exact").passed


class TestStates:
    @pytest.mark.unit
    def test_state_round_trip(self):
        state = synthesize_state([0.25, -0.5], [1.0, 1.0], 1)
        again = state_from_model(state_to_model(state))
        assert again.moments == pytest.approx(state.moments)
        assert (again.n, again.t, again.degree) == (2, 2, 1)
