"""Response envelope {meta, input, output, error} printed by every command."""

from __future__ import annotations

import hashlib
import json
import uuid
from datetime import datetime, timezone
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .errors import CertifierError
from .observability import AGENT_NAME

TRACE_NAMESPACE = uuid.uuid5(uuid.NAMESPACE_URL, "matrix-certifier")


class MetaModel(BaseModel):
    """Metadata for all agent responses"""

    agent: str = AGENT_NAME
    version: str = __version__
    command: str
    trace_id: str
    ts: str | None = None
    hash: str = Field(default="", description="SHA256 of the canonical output JSON")
    elapsed_ms: float | None = None


class ErrorModel(BaseModel):
    type: Literal["input_error", "numerical_error", "search_error", "config_error"]
    message: str
    details: dict[str, Any] = Field(default_factory=dict)
    recoverable: bool = False


class Envelope(BaseModel):
    """Standard response wrapper"""

    model_config = ConfigDict(extra="forbid")

    meta: MetaModel
    input: dict[str, Any]
    output: dict[str, Any] | None = None
    error: ErrorModel | None = None


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)


def content_hash(data: Any) -> str:
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def error_model(exc: CertifierError) -> ErrorModel:
    return ErrorModel(
        type=exc.error_type,
        message=exc.message,
        details=json.loads(canonical_json(exc.details)),
        recoverable=exc.recoverable,
    )


def build_envelope(
    command: str,
    input_data: dict[str, Any],
    output: dict[str, Any] | None = None,
    error: ErrorModel | None = None,
    *,
    seed: int | None = None,
    elapsed_ms: float | None = None,
) -> Envelope:
    """With a seed, trace_id is derived from input and seed, and timing is dropped."""
    if seed is not None:
        trace_id = str(uuid.uuid5(TRACE_NAMESPACE, f"{content_hash(input_data)}:{seed}"))
        ts = None
        elapsed_ms = None
    else:
        trace_id = str(uuid.uuid4())
        ts = datetime.now(timezone.utc).isoformat().replace("+00:00", "Z")
    meta = MetaModel(
        command=command,
        trace_id=trace_id,
        ts=ts,
        hash=content_hash(output) if output is not None else "",
        elapsed_ms=elapsed_ms,
    )
    return Envelope(meta=meta, input=input_data, output=output, error=error)


def render(envelope: Envelope) -> str:
    return json.dumps(envelope.model_dump(mode="json"), indent=2, sort_keys=True)
