"""Test configuration and fixtures for covnmf."""

import os

import numpy as np
import pytest
import structlog

from covnmf.config import CovNMFSettings
from covnmf.datasets import load_orthodont, orthodont_covariates
from covnmf.io import LabeledMatrix
from covnmf.log import configure_default_logging

# Values printed for the orthodontic example
ORTHODONT_R2_PLAIN = 0.9064937
ORTHODONT_R2_DUMMY = 0.4267753
ORTHODONT_R2_LINE = 0.422
ORTHODONT_THETA_COLSUMS = (90.586, 9.292)
ORTHODONT_THETA = ((41.550, 8.627), (49.036, 0.665))
ORTHODONT_THETA_HAT = ((41.522, 8.672), (49.066, 0.616))


@pytest.fixture
def settings() -> CovNMFSettings:
    """Settings built from a clean environment."""
    return CovNMFSettings()


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator for random instances."""
    return np.random.default_rng(20240617)


@pytest.fixture(scope="session")
def orthodont() -> LabeledMatrix:
    """The bundled 4 x 27 orthodontic growth data."""
    return load_orthodont()


@pytest.fixture(scope="session")
def orthodont_dummy(orthodont: LabeledMatrix) -> LabeledMatrix:
    """Intercept and male-dummy covariates aligned with ``orthodont``."""
    return orthodont_covariates(orthodont.col_labels)


@pytest.fixture(autouse=True)
def clean_environment():
    """Clean COVNMF_* environment variables before and after each test."""
    original_env = dict(os.environ)

    for var in [name for name in os.environ if name.upper().startswith("COVNMF_")]:
        os.environ.pop(var, None)

    yield

    os.environ.clear()
    os.environ.update(original_env)


def pytest_configure(config):
    """Configure pytest markers."""
    config.addinivalue_line("markers", "unit: marks tests as unit tests")
    config.addinivalue_line("markers", "integration: marks tests as integration tests")
    config.addinivalue_line("markers", "slow: marks tests as slow running tests")


@pytest.fixture(autouse=True)
def reset_logging():
    """Restore the package logging defaults after each test."""
    yield
    structlog.reset_defaults()
    configure_default_logging()
