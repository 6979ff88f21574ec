from __future__ import annotations

from typing import Annotated

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, NoDecode, SettingsConfigDict


class Settings(BaseSettings):
    """Laboratory configuration loaded from environment variables or .env file."""

    # Logging
    log_level: str = "INFO"
    log_json: bool = True

    # ODE integration
    ode_method: str = "DOP853"
    ode_rtol: float = Field(default=1e-10, gt=0)
    ode_atol: float = Field(default=1e-12, gt=0)

    # Eigenvalue location and sampling
    eig_tol: float = Field(default=1e-9, gt=0)
    eigen_match_tol: float = Field(default=1e-6, gt=0)
    grid_points: int = Field(default=2048, ge=16)
    max_bracket_doublings: int = Field(default=60, ge=1)

    # Tolerances for residual-style invariants
    spectral_guard: float = Field(default=1e-6, gt=0)
    resid_tol: float = Field(default=1e-6, gt=0)
    coupling_tol: float = Field(default=1e-8, gt=0)
    merge_tol: float = Field(default=1e-7, gt=0)
    jordan_tol: float = Field(default=1e-6, gt=0)
    degeneracy_tol: float = Field(default=1e-8, gt=0)

    # Problem validation
    positivity_floor: float = Field(default=1e-12, gt=0)
    validation_samples: int = Field(default=10_000, ge=10)
    min_eps: float = Field(default=1e-6, gt=0)

    # Resolvent discretization
    resolvent_nodes: int = Field(default=512, ge=16)
    resolvent_min_panel_nodes: int = Field(default=8, ge=2)
    resolvent_doubling_rtol: float = Field(default=0.1, gt=0)

    # Batch runs
    workers: int = Field(default=1, ge=1)
    csv_digits: int = Field(default=17, ge=6, le=17)
    default_eps_grid: Annotated[list[float], NoDecode] = Field(
        default_factory=lambda: [0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625]
    )
    default_n_track: int = 8
    default_truncation: float = 50.0

    model_config = SettingsConfigDict(
        env_prefix="STRINGLAB_", env_file=".env", extra="ignore"
    )

    @field_validator("default_eps_grid", mode="before")
    @classmethod
    def split_eps_grid(cls, value: str | list[float]) -> list[float]:
        """Allow providing the ε grid as a comma separated string."""
        if isinstance(value, str):
            return [float(item) for item in value.split(",") if item.strip()]
        return value

    @field_validator("ode_method")
    @classmethod
    def check_ode_method(cls, value: str) -> str:
        allowed = {"RK45", "DOP853", "RK23"}
        if value not in allowed:
            raise ValueError(f"ode_method must be one of {sorted(allowed)}")
        return value

    def eig_xtol(self, lam: float) -> float:
        """Absolute eigenvalue tolerance for |λ| <= 1, relative above."""
        return self.eig_tol * max(1.0, abs(lam))


settings = Settings()
