from __future__ import annotations

import math
from typing import Literal

from pydantic import Field, field_validator, model_validator

from stringlab.schemas.common import SchemaModel

Task = Literal["perturbed", "limit", "convergence", "resolvent"]
TASK_ORDER: tuple[str, ...] = ("perturbed", "limit", "convergence", "resolvent")


class SweepConfig(SchemaModel):
    eps_grid: list[float] = Field(min_length=1)
    n_track: int = Field(default=8, ge=1)
    truncation: float = Field(default=50.0, gt=0)
    zeta_re: float = 0.0
    zeta_im: float = 1.0
    cluster_radius: float | None = Field(default=None, gt=0)
    resolvent_nodes: int | None = Field(default=None, ge=16)

    @field_validator("eps_grid")
    @classmethod
    def check_eps_grid(cls, value: list[float]) -> list[float]:
        if any(e <= 0 for e in value):
            raise ValueError("every eps must be positive")
        if any(b >= a for a, b in zip(value, value[1:])):
            raise ValueError("eps_grid must be strictly decreasing")
        return value

    @field_validator("zeta_re", "zeta_im")
    @classmethod
    def check_zeta_finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("the resolvent point ζ must be finite")
        return value

    @property
    def zeta(self) -> complex:
        return complex(self.zeta_re, self.zeta_im)


class RunManifest(SchemaModel):
    spec_path: str | None = None
    spec_name: str | None = None
    sweep: SweepConfig
    outputs: str
    tasks: list[Task] = Field(default_factory=lambda: list(TASK_ORDER))
    seed: int = 0
    fmt: Literal["csv", "csv+svg"] = "csv+svg"

    @model_validator(mode="after")
    def close_tasks(self) -> "RunManifest":
        if (self.spec_path is None) == (self.spec_name is None):
            raise ValueError("exactly one of spec_path or spec_name is required")
        wanted = set(self.tasks)
        if wanted & {"convergence", "resolvent"}:
            wanted |= {"perturbed", "limit"}
        self.tasks = [t for t in TASK_ORDER if t in wanted]
        return self
