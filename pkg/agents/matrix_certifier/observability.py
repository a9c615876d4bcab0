"""Structured JSONL logging to stderr.

Library modules obtain loggers under the ``matrix_certifier`` namespace and
report through ``log_event``; only the CLI installs a handler.
"""

from __future__ import annotations

import json
import logging
import sys
from datetime import datetime, timezone
from typing import Any

from . import __version__

AGENT_NAME = "matrix_certifier"


class _StderrHandler(logging.StreamHandler):  # type: ignore[type-arg]
    """Writes to the current ``sys.stderr``, which test capture may swap out."""

    def emit(self, record: logging.LogRecord) -> None:
        self.stream = sys.stderr
        super().emit(record)


def setup_logging(level: str = "INFO") -> logging.Logger:
    """Install the STDERR JSONL handler on the package logger."""
    logger = logging.getLogger(AGENT_NAME)
    logger.setLevel(getattr(logging, level.upper(), logging.INFO))

    for handler in logger.handlers[:]:
        logger.removeHandler(handler)

    handler = _StderrHandler()
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(handler)
    logger.propagate = False
    return logger


def get_logger(module: str) -> logging.Logger:
    return logging.getLogger(f"{AGENT_NAME}.{module.rsplit('.', 1)[-1]}")


def _jsonable(value: Any) -> Any:
    if isinstance(value, float | int | str | bool) or value is None:
        return value
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [_jsonable(v) for v in value]
    return str(value)


def log_event(
    logger: logging.Logger, event: str, level: int = logging.INFO, **fields: Any
) -> None:
    """Emit one JSON line ``{ts, lvl, event, agent, version, ...}``."""
    if not logger.isEnabledFor(level):
        return
    entry = {
        "ts": datetime.now(timezone.utc).isoformat().replace("+00:00", "Z"),
        "lvl": logging.getLevelName(level),
        "event": event,
        "agent": AGENT_NAME,
        "version": __version__,
        **{key: _jsonable(value) for key, value in fields.items()},
    }
    logger.log(level, json.dumps(entry))
