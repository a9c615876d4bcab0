"""Unit tests for the JSONL logging helpers."""

import io
import json
import sys

import pytest

from matrix_certifier.observability import get_logger, log_event, setup_logging


class TestLogging:
    @pytest.mark.unit
    def test_handler_follows_current_stderr(self, monkeypatch):
        setup_logging("INFO")
        first, second = io.StringIO(), io.StringIO()
        logger = get_logger("matrix_certifier.certify")

        monkeypatch.setattr(sys, "stderr", first)
        log_event(logger, "search.started", degree=1)
        first.close()
        monkeypatch.setattr(sys, "stderr", second)
        log_event(logger, "search.finished", degree=2)

        entry = json.loads(second.getvalue().strip())
        assert entry["event"] == "search.finished"
        assert entry["degree"] == 2
        assert entry["agent"] == "matrix_certifier"

    @pytest.mark.unit
    def test_level_filters_events(self, monkeypatch):
        setup_logging("ERROR")
        buf = io.StringIO()
        monkeypatch.setattr(sys, "stderr", buf)
        log_event(get_logger("matrix_certifier.gram"), "gram.built", blocks=3)
        assert buf.getvalue() == ""
