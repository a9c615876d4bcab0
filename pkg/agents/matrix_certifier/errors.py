"""Exception hierarchy for the matrix certifier.

Every failure the library raises derives from ``CertifierError``.  The three
families map onto the CLI exit contract: ``InputError`` is a usage or input
problem (exit 3), ``NumericalError`` and ``SearchError`` end a run as
exhausted/unknown (exit 2) unless a command documents otherwise.
"""

from __future__ import annotations

from typing import Any, Literal

ErrorType = Literal["input_error", "numerical_error", "search_error", "config_error"]


class CertifierError(Exception):
    """Base class; carries a machine readable type and optional details."""

    error_type: ErrorType = "search_error"
    recoverable: bool = False

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message)
        self.message = message
        self.details = details


# =============================================================================
# INPUT ERRORS
# =============================================================================


class InputError(CertifierError):
    error_type: ErrorType = "input_error"


class DimensionMismatch(InputError):
    """Matrix sizes or variable counts do not agree."""


class NonFiniteInput(InputError):
    """A NaN or infinity reached an operation that needs finite data."""


class MalformedInstance(InputError):
    """An SDP instance whose blocks, constraints or rhs are inconsistent."""


class InputFormatError(InputError):
    """A JSON input file failed schema or model validation."""


class NonScalarGenerator(InputError):
    """trace_reduce needs every generator to be g·I with scalar g."""


class ProductModuleTooLarge(InputError):
    """More than 20 scalar generators were passed to product_module."""


class ConfigError(CertifierError):
    error_type: ErrorType = "config_error"


# =============================================================================
# NUMERICAL ERRORS
# =============================================================================


class NumericalError(CertifierError):
    error_type: ErrorType = "numerical_error"
    recoverable = True


class IndefiniteInput(NumericalError):
    """psd_factor received a matrix with an eigenvalue below -tol."""


class IndefiniteBlock(IndefiniteInput):
    """A Gram block of a solver solution is not PSD within tolerance."""


class SingularSystem(NumericalError):
    """LU pivot below threshold or residual check failed."""


class RationalizationFailed(NumericalError):
    """Rounding to rationals broke PSD-ness; the certificate stays numeric."""


class RayNotVerifiable(NumericalError):
    """A dual ray could not be turned into a normalized separating state."""


# =============================================================================
# SEARCH ERRORS
# =============================================================================


class SearchError(CertifierError):
    error_type: ErrorType = "search_error"


class DegreeTooSmall(SearchError):
    """The target has coefficients outside the span reachable at this degree."""

    recoverable = True


class BranchCapExceeded(SearchError):
    """Diagonalization produced more branches than allowed."""

    def __init__(self, message: str, partial: list[Any], **details: Any) -> None:
        super().__init__(message, **details)
        self.partial = partial


class NotPsdOnLine(SearchError):
    """A univariate matrix polynomial fails to be PSD; ``witness`` is a point."""

    def __init__(self, message: str, witness: float, min_eigenvalue: float) -> None:
        super().__init__(message, witness=witness, min_eigenvalue=min_eigenvalue)
        self.witness = witness
        self.min_eigenvalue = min_eigenvalue


class SubstitutionMismatch(SearchError):
    """Substituting Y -> f into an exact scalar identity did not give f."""


class NegativeSemidefiniteInput(SearchError):
    """constant_nnsd_witness needs a matrix with a positive eigenvalue."""


class EmptyBoxOrNoSamples(CertifierError):
    """Sampling box is empty or inverted."""

    error_type: ErrorType = "input_error"
    recoverable = True


# =============================================================================
# WARNINGS
# =============================================================================


class NotArchimedeanWarning(UserWarning):
    """No archimedean witness was found; completeness claims are dropped."""
