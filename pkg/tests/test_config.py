"""Settings from the environment."""

import pytest
from pydantic import ValidationError

from stringlab.core.config import Settings


def test_defaults():
    s = Settings(_env_file=None)
    assert s.workers == 1
    assert s.default_eps_grid[0] == 0.2
    assert s.eig_xtol(0.5) == s.eig_tol
    assert s.eig_xtol(1e3) == pytest.approx(1e3 * s.eig_tol)


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("STRINGLAB_WORKERS", "4")
    monkeypatch.setenv("STRINGLAB_DEFAULT_EPS_GRID", "0.3, 0.15,0.075")
    s = Settings(_env_file=None)
    assert s.workers == 4
    assert s.default_eps_grid == [0.3, 0.15, 0.075]


def test_dotenv_file(tmp_path):
    env = tmp_path / ".env"
    env.write_text("STRINGLAB_RESOLVENT_NODES=96\nSTRINGLAB_LOG_JSON=false\n")
    s = Settings(_env_file=env)
    assert s.resolvent_nodes == 96
    assert s.log_json is False


@pytest.mark.parametrize("field, value", [("workers", 0), ("ode_method", "Euler"), ("csv_digits", 20)])
def test_invalid_values(field, value):
    with pytest.raises(ValidationError):
        Settings(_env_file=None, **{field: value})
