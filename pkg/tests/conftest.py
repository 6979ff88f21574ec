"""Shared fixtures: reduced-size settings and the bundled problem specs."""

from pathlib import Path

import pytest
import structlog

from stringlab.core.config import Settings
from stringlab.repositories import catalog
from stringlab.services.convergence_service import ConvergenceService
from stringlab.services.limit_service import LimitService
from stringlab.services.perturbed_service import PerturbedService

TEST_DATA = Path(__file__).resolve().parent.parent / "test_data"


@pytest.fixture(autouse=True)
def _reset_structlog():
    """Undo `setup_logging` after each test so loggers never hold a closed capture stream."""
    yield
    structlog.reset_defaults()


@pytest.fixture(scope="session")
def settings() -> Settings:
    """Settings with grids small enough for the test suite, independent of any .env file."""
    return Settings(
        _env_file=None,
        log_json=False,
        grid_points=1024,
        resolvent_nodes=64,
        validation_samples=2000,
        workers=1,
    )


@pytest.fixture(scope="session")
def test_data_dir() -> Path:
    return TEST_DATA


@pytest.fixture(scope="session")
def perturbed_service(settings):
    return PerturbedService(settings)


@pytest.fixture(scope="session")
def limit_service(settings):
    return LimitService(settings)


@pytest.fixture(scope="session")
def convergence_service(settings, perturbed_service, limit_service):
    return ConvergenceService(settings, perturbed_service, limit_service)


@pytest.fixture
def dirichlet_spec():
    return catalog.dirichlet_model()


@pytest.fixture
def jordan_spec():
    return catalog.jordan_model()


@pytest.fixture
def asymmetric_spec():
    return catalog.asymmetric_dirichlet()


@pytest.fixture
def neumann_spec():
    return catalog.full_neumann()


@pytest.fixture
def robin_spec():
    return catalog.robin_variant()
