"""Integration tests: run every bundled instance through the CLI."""

import json

import pytest

from matrix_certifier import cli
from matrix_certifier.cli import main
from matrix_certifier.errors import NumericalError

from ..conftest import EXAMPLES_DIR


def _instances():
    with open(EXAMPLES_DIR / "manifest.json", encoding="utf-8") as f:
        manifest = json.load(f)
    for inst in manifest["instances"]:
        marks = [pytest.mark.slow] if inst.get("slow") else []
        yield pytest.param(inst, id=inst["name"], marks=marks)


@pytest.fixture
def in_examples(examples_dir, monkeypatch):
    monkeypatch.chdir(examples_dir)
    return examples_dir


class TestManifest:
    @pytest.mark.integration
    @pytest.mark.parametrize("instance", list(_instances()))
    def test_expected_exit_code(self, in_examples, capsys, instance):
        code = main(instance["args"])
        envelope = json.loads(capsys.readouterr().out)
        assert code in instance["expected_exit"], envelope
        assert envelope["meta"]["command"] == instance["args"][0]


class TestDeterminism:
    @pytest.mark.integration
    def test_seeded_runs_are_identical(self, in_examples, capsys):
        args = ["diagonalize", "symmetric_2x2.json", "--check-points", "50", "--seed", "5"]
        assert main(args) == 0
        first = capsys.readouterr().out
        assert main(args) == 0
        assert capsys.readouterr().out == first

    @pytest.mark.integration
    def test_seeded_membership_has_no_timing(self, in_examples, capsys):
        main(["check-membership", "x_plus_2.json", "-g", "interval.json", "--dmax", "2", "--seed", "1"])
        envelope = json.loads(capsys.readouterr().out)
        assert envelope["meta"]["ts"] is None
        assert envelope["meta"]["elapsed_ms"] is None
        assert "elapsed_ms" not in envelope["output"]


class TestExitCodes:
    @pytest.mark.integration
    def test_missing_file(self, in_examples, capsys):
        assert main(["verify", "no_such_file.json"]) == 3
        envelope = json.loads(capsys.readouterr().out)
        assert envelope["error"]["type"] == "input_error"

    @pytest.mark.integration
    def test_usage_error(self, in_examples, capsys):
        with pytest.raises(SystemExit) as info:
            main(["check-membership"])
        assert info.value.code == 3

    @pytest.mark.integration
    def test_bad_config(self, in_examples, tmp_path, capsys):
        cfg = tmp_path / "bad.toml"
        cfg.write_text("feas_tol = 5.0\n", encoding="utf-8")
        assert main(["verify", "trace_det_certificate.json", "--config", str(cfg)]) == 3
        envelope = json.loads(capsys.readouterr().out)
        assert envelope["error"]["type"] == "config_error"

    @pytest.mark.integration
    def test_numerical_error_is_unknown(self, in_examples, capsys, mocker):
        def explode(args, config):
            raise NumericalError("solver broke down", iteration=7)

        mocker.patch.dict(cli.COMMANDS, {"verify": explode})
        assert main(["verify", "trace_det_certificate.json"]) == 2
        envelope = json.loads(capsys.readouterr().out)
        assert envelope["error"] == {
            "type": "numerical_error",
            "message": "solver broke down",
            "details": {"iteration": 7},
            "recoverable": True,
        }

    @pytest.mark.integration
    def test_json_out(self, in_examples, tmp_path, capsys):
        out = tmp_path / "envelope.json"
        assert main(["verify", "trace_det_certificate.json", "--json", str(out)]) == 0
        printed = capsys.readouterr().out
        assert json.loads(out.read_text(encoding="utf-8")) == json.loads(printed)
