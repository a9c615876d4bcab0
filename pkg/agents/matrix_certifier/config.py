"""Configuration for searches, solver and CLI.

Resolution order: defaults < config file (``key = value`` lines, parsed as
TOML) < environment (``MATRIX_CERTIFIER_<KEY>``) < command-line flags.
"""

from __future__ import annotations

import os
import tomllib
from collections.abc import Mapping
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import ConfigError

ENV_PREFIX = "MATRIX_CERTIFIER_"

# =============================================================================
# CONFIG SECTION
# =============================================================================


class SdpOptions(BaseModel):
    """Solver-level options."""

    model_config = ConfigDict(frozen=True)

    feas_tol: float = Field(default=1e-8, gt=0.0, le=1e-2)
    max_iter: int = Field(default=200, ge=1, le=10_000)


class CertifierConfig(BaseModel):
    """All tunables of the certifier with their validated ranges."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    # Solver
    feas_tol: float = Field(default=1e-8, gt=0.0, le=1e-2)
    max_iter: int = Field(default=200, ge=1, le=10_000)

    # Degree schedule
    dmax: int | None = Field(default=None, ge=0, le=64)
    extra_degrees: int = Field(default=4, ge=0, le=32)
    parallel_degrees: bool = False
    max_workers: int = Field(default=4, ge=1, le=64)

    # Exactness
    exact: bool = True
    max_denominator: int = Field(default=2**20, ge=2)

    # Extraction
    extract_tol: float = Field(default=1e-5, gt=0.0, le=1.0)
    rank_one_ratio: float = Field(default=1e-4, gt=0.0, le=1.0)

    # Diagonalization
    branch_cap: int = Field(default=64, ge=1, le=100_000)

    # Sampling
    seed: int | None = Field(default=None, ge=0)
    sample_count: int = Field(default=1000, ge=1, le=10_000_000)
    box_radius: float = Field(default=2.0, gt=0.0)

    # Archimedean witness search
    arch_n_max: int = Field(default=64, ge=1)
    arch_d_max: int = Field(default=2, ge=1, le=16)

    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"

    @field_validator("log_level", mode="before")
    @classmethod
    def _upper_level(cls, value: Any) -> Any:
        return value.upper() if isinstance(value, str) else value

    @property
    def sdp_options(self) -> SdpOptions:
        return SdpOptions(feas_tol=self.feas_tol, max_iter=self.max_iter)

    def override(self, **changes: Any) -> CertifierConfig:
        """Return a validated copy with ``changes`` applied (None values skipped)."""
        data = self.model_dump()
        data.update({k: v for k, v in changes.items() if v is not None})
        return _validate(data, "override")


def _validate(data: Mapping[str, Any], source: str) -> CertifierConfig:
    try:
        return CertifierConfig.model_validate(dict(data))
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration from {source}", errors=exc.errors()) from exc


def read_config_file(path: Path) -> dict[str, Any]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not key = value data: {exc}") from exc


def load_env_config(environ: Mapping[str, str] | None = None) -> dict[str, str]:
    environ = os.environ if environ is None else environ
    fields = CertifierConfig.model_fields
    values: dict[str, str] = {}
    for key in fields:
        raw = environ.get(ENV_PREFIX + key.upper())
        if raw is not None:
            values[key] = raw
    return values


def load_config(
    config_file: Path | None = None,
    environ: Mapping[str, str] | None = None,
    **flags: Any,
) -> CertifierConfig:
    """Merge defaults, file, environment and flags into one validated config."""
    data: dict[str, Any] = {}
    if config_file is not None:
        data.update(read_config_file(config_file))
    data.update(load_env_config(environ))
    data.update({k: v for k, v in flags.items() if v is not None})
    return _validate(data, str(config_file) if config_file else "environment/flags")


DEFAULT_CONFIG = CertifierConfig()
