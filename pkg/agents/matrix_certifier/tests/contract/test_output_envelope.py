"""Contract tests: every CLI run prints one schema-valid Agent Envelope."""

import json

import jsonschema
import pytest

from matrix_certifier.cli import main


def _schema(schemas_dir, name):
    with open(schemas_dir / name, encoding="utf-8") as f:
        return json.load(f)


@pytest.fixture
def run(examples_dir, monkeypatch, capsys):
    monkeypatch.chdir(examples_dir)

    def _run(*argv):
        code = main(list(argv))
        return code, json.loads(capsys.readouterr().out)

    return _run


class TestEnvelope:
    @pytest.mark.contract
    @pytest.mark.parametrize(
        "argv",
        [
            ("verify", "trace_det_certificate.json", "--exact"),
            ("verify-point", "pair_minus_x.json", "minus_x.json", "-g", "interval.json"),
            ("product-module", "-g", "interval.json", "-g", "x_plus_2.json"),
            ("sample", "-g", "disk.json", "--count", "5", "--seed", "7"),
            ("selfcheck",),
        ],
    )
    def test_success_envelopes(self, run, schemas_dir, argv):
        code, envelope = run(*argv)
        assert code == 0
        jsonschema.validate(envelope, _schema(schemas_dir, "envelope.json"))
        meta = envelope["meta"]
        assert meta["agent"] == "matrix_certifier"
        assert meta["command"] == argv[0]
        assert len(meta["hash"]) == 64
        assert envelope["error"] is None

    @pytest.mark.contract
    def test_error_envelope(self, run, schemas_dir, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"n": 1}', encoding="utf-8")
        code, envelope = run("factor-univariate", str(bad))
        assert code == 3
        jsonschema.validate(envelope, _schema(schemas_dir, "envelope.json"))
        assert envelope["output"] is None
        assert envelope["error"]["type"] == "input_error"
        assert envelope["meta"]["hash"] == ""

    @pytest.mark.contract
    def test_input_records_file_hashes(self, run):
        _, envelope = run("verify", "trace_det_certificate.json")
        files = envelope["input"]["files"]
        assert list(files) == ["trace_det_certificate.json"]
        assert len(files["trace_det_certificate.json"]) == 64


class TestOutcomeOutput:
    @pytest.mark.contract
    def test_membership_outcome(self, run, schemas_dir):
        code, envelope = run("check-membership", "x_plus_2.json", "-g", "interval.json", "--dmax", "2")
        assert code == 0
        output = envelope["output"]
        jsonschema.validate(output, _schema(schemas_dir, "outcome.json"))
        jsonschema.validate(output["certificate"], _schema(schemas_dir, "certificate.json"))
        assert output["verdict"] == "CertificateFound"

    @pytest.mark.contract
    def test_state_file(self, run, schemas_dir, tmp_path):
        state_path = tmp_path / "state.json"
        code, envelope = run(
            "check-membership", "minus_x.json", "-g", "interval.json", "--dmax", "1", "--state-out", str(state_path)
        )
        assert code == 1
        assert envelope["output"]["verdict"] == "Separated"
        with open(state_path, encoding="utf-8") as f:
            jsonschema.validate(json.load(f), _schema(schemas_dir, "state.json"))
