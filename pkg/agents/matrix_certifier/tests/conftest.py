"""Shared fixtures for matrix certifier tests."""

from fractions import Fraction
from pathlib import Path

import pytest

from matrix_certifier.config import CertifierConfig
from matrix_certifier.gram import ModulePresentation
from matrix_certifier.polycore import MatrixPoly, ScalarPoly

EXAMPLES_DIR = Path(__file__).resolve().parent.parent / "examples"
SCHEMAS_DIR = Path(__file__).resolve().parent.parent / "schemas"


def var(n: int, i: int) -> ScalarPoly:
    return ScalarPoly.variable(n, i)


def const(n: int, c: object) -> ScalarPoly:
    return ScalarPoly.constant(n, c)


@pytest.fixture
def examples_dir() -> Path:
    return EXAMPLES_DIR


@pytest.fixture
def schemas_dir() -> Path:
    return SCHEMAS_DIR


@pytest.fixture
def exact_config() -> CertifierConfig:
    return CertifierConfig(exact=True)


@pytest.fixture
def numeric_config() -> CertifierConfig:
    return CertifierConfig(exact=False)


@pytest.fixture
def interval() -> ModulePresentation:
    """[-1, 1] as {1 - X^2 >= 0} on 1x1 matrices."""
    x = var(1, 0)
    return ModulePresentation.scalar(1, 1, [1 - x * x])


@pytest.fixture
def x_plus_2() -> MatrixPoly:
    return MatrixPoly.from_scalar(var(1, 0) + 2)


@pytest.fixture
def symbolic_2x2() -> MatrixPoly:
    """[[a, b], [b, c]] in three variables."""
    a, b, c = var(3, 0), var(3, 1), var(3, 2)
    return MatrixPoly([[a, b], [b, c]], 3)


@pytest.fixture
def half() -> Fraction:
    return Fraction(1, 2)
