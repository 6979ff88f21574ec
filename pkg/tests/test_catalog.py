"""Built-in problem specs."""

import math

import pytest

from stringlab.core.errors import ConfigurationError
from stringlab.models.coeffs import validate_spec
from stringlab.models.limit import EigenKind
from stringlab.repositories.catalog import builtin_spec, list_builtin_specs


def test_catalog_is_complete_and_valid(settings):
    specs = list_builtin_specs()
    assert set(specs) == {
        "full-neumann",
        "dirichlet-model",
        "asymmetric-dirichlet",
        "jordan-model",
        "robin-variant",
        "random-generic",
    }
    for name, spec in specs.items():
        assert validate_spec(spec, settings).valid, name


def test_unknown_name():
    with pytest.raises(ConfigurationError, match="unknown built-in spec"):
        builtin_spec("no-such-model")


def test_random_generic_is_seeded():
    """Same seed, same coefficients; different seed, different ones."""
    first, again, other = builtin_spec("random-generic", 3), builtin_spec("random-generic", 3), builtin_spec("random-generic", 4)
    assert first.alpha == again.alpha
    assert first.q(0.1) == again.q(0.1)
    assert first.alpha != other.alpha
    assert first.name == "random-generic-3"


def test_jordan_model_has_double_jordan_value(limit_service):
    data = limit_service.limit_spectrum(builtin_spec("jordan-model"), 5)
    kinds = {round(d.lam, 8): d.kind for d in data}
    assert kinds[round(math.pi**2 / 4, 8)] is EigenKind.DOUBLE_JORDAN
