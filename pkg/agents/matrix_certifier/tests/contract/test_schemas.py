"""Contract tests: bundled schemas are draft-07 and bundled examples conform."""

import json

import jsonschema
import pytest

from matrix_certifier.cli import schemas
from matrix_certifier.wire import MatrixPolyModel, PresentationModel

SCHEMA_FILES = [
    "matrix_poly.json",
    "presentation.json",
    "certificate.json",
    "state.json",
    "pair.json",
    "outcome.json",
    "envelope.json",
]

MATRIX_EXAMPLES = [
    "motzkin.json",
    "motzkin_quarter.json",
    "disk.json",
    "interval.json",
    "minus_x.json",
    "x_plus_2.json",
    "nnsd_diag.json",
    "counterexample.json",
    "rotation.json",
    "upper_triangular.json",
    "univariate_square.json",
    "not_psd_on_line.json",
    "symmetric_2x2.json",
]


def _load(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


class TestSchemaFiles:
    @pytest.mark.contract
    @pytest.mark.parametrize("name", SCHEMA_FILES)
    def test_draft07(self, schemas_dir, name):
        schema = _load(schemas_dir / name)
        assert schema["$schema"] == "http://json-schema.org/draft-07/schema#"
        assert schema["title"].startswith("Matrix Certifier")
        jsonschema.Draft7Validator.check_schema(schema)

    @pytest.mark.contract
    def test_envelope_schema_requires_all_sections(self, schemas_dir):
        schema = _load(schemas_dir / "envelope.json")
        assert schema["title"] == "Matrix Certifier Output (Agent Envelope)"
        assert set(schema["required"]) == {"meta", "input", "output", "error"}
        assert schema["properties"]["meta"]["properties"]["agent"]["const"] == "matrix_certifier"

    @pytest.mark.contract
    def test_print_schemas_covers_wire_models(self):
        names = set(schemas())
        assert {"MatrixPoly", "ModulePresentation", "Certificate", "State", "PointVectorPair", "SearchOutcome"} <= names


class TestExamplesConform:
    @pytest.mark.contract
    @pytest.mark.parametrize("name", MATRIX_EXAMPLES)
    def test_matrix_examples(self, examples_dir, schemas_dir, name):
        data = _load(examples_dir / name)
        jsonschema.validate(data, _load(schemas_dir / "matrix_poly.json"))
        MatrixPolyModel.model_validate(data)

    @pytest.mark.contract
    def test_presentation_example(self, examples_dir, schemas_dir):
        data = _load(examples_dir / "ball_presentation.json")
        jsonschema.validate(data, _load(schemas_dir / "presentation.json"))
        PresentationModel.model_validate(data)

    @pytest.mark.contract
    def test_certificate_example(self, examples_dir, schemas_dir):
        data = _load(examples_dir / "trace_det_certificate.json")
        jsonschema.validate(data, _load(schemas_dir / "certificate.json"))

    @pytest.mark.contract
    def test_pair_example(self, examples_dir, schemas_dir):
        jsonschema.validate(_load(examples_dir / "pair_minus_x.json"), _load(schemas_dir / "pair.json"))

    @pytest.mark.contract
    def test_manifest_references_existing_files(self, examples_dir):
        manifest = _load(examples_dir / "manifest.json")
        for instance in manifest["instances"]:
            for arg in instance["args"]:
                if arg.endswith(".json"):
                    assert (examples_dir / arg).exists(), f"{instance['name']}: {arg} missing"
