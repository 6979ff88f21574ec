from __future__ import annotations

from pydantic import Field, computed_field

from stringlab.schemas.common import SchemaModel


class ValidationIssue(SchemaModel):
    check: str
    message: str


class ValidationReport(SchemaModel):
    name: str = "unnamed"
    issues: list[ValidationIssue] = Field(default_factory=list)

    @computed_field
    @property
    def valid(self) -> bool:
        return not self.issues

    def add(self, check: str, message: str) -> None:
        self.issues.append(ValidationIssue(check=check, message=message))

    def messages(self) -> list[str]:
        return [issue.message for issue in self.issues]


class SpectrumRow(SchemaModel):
    eps: float
    index: int
    lambda_eps: float


class LimitSpectrumRow(SchemaModel):
    n: int
    lam: float = Field(serialization_alias="lambda")
    mult: int
    in_Aa: bool
    in_B: bool
    in_Ab: bool
    kind: str


class PairRow(SchemaModel):
    n: int
    eps: float
    lambda_eps: float
    lambda_limit: float
    gap: float = Field(ge=0)


class RateRow(SchemaModel):
    n: int
    slope: float | None = None
    constant: float | None = None
    points: int = 0
    status: str = "fitted"


class ClusterRow(SchemaModel):
    lam: float
    mult: int
    radius: float
    eps: float
    count: int


class HausdorffRow(SchemaModel):
    eps: float
    cutoff: float
    distance: float = Field(ge=0)


class EfunGapRow(SchemaModel):
    n: int
    eps: float
    lam: float
    gap: float = Field(ge=0)
    source: str
    limit_norm: float | None = None


class SubspaceGapRow(SchemaModel):
    lam: float
    mult: int
    eps: float
    gap: float = Field(ge=0)


class ResolventGapRow(SchemaModel):
    eps: float
    zeta_re: float
    zeta_im: float
    gap: float = Field(ge=0)
    gap_coarse: float = Field(ge=0)
    resolved: bool
    nodes: int


class GroundStateRow(SchemaModel):
    eps: float
    lambda_eps: float
    deviation: float = Field(ge=0)


class AnomalyRow(SchemaModel):
    eps: float
    n: int
    index_match: float
    nearest_match: float


class CriterionResult(SchemaModel):
    name: str
    passed: bool
    hard: bool = True
    detail: str = ""


class ConvergenceReport(SchemaModel):
    spec_name: str
    eps_grid: list[float]
    pairs: list[PairRow] = Field(default_factory=list)
    rates: list[RateRow] = Field(default_factory=list)
    clusters: list[ClusterRow] = Field(default_factory=list)
    hausdorff: list[HausdorffRow] = Field(default_factory=list)
    efun_gaps: list[EfunGapRow] = Field(default_factory=list)
    subspace_gaps: list[SubspaceGapRow] = Field(default_factory=list)
    resolvent_gaps: list[ResolventGapRow] = Field(default_factory=list)
    ground_state: list[GroundStateRow] = Field(default_factory=list)
    anomalies: list[AnomalyRow] = Field(default_factory=list)
    eps_monotone: dict[int, float | None] = Field(default_factory=dict)
    criteria: list[CriterionResult] = Field(default_factory=list)

    def tables(self) -> dict[str, list[SchemaModel]]:
        return {
            "pairs": self.pairs,
            "rates": self.rates,
            "clusters": self.clusters,
            "hausdorff": self.hausdorff,
            "efun_gaps": self.efun_gaps,
            "subspace_gaps": self.subspace_gaps,
            "resolvent_gaps": self.resolvent_gaps,
            "ground_state": self.ground_state,
            "anomalies": self.anomalies,
        }


class RunSummary(SchemaModel):
    spec_name: str
    spec_path: str | None = None
    tasks: list[str]
    seed: int
    artifacts: list[str] = Field(default_factory=list)
    criteria: list[CriterionResult] = Field(default_factory=list)
    validation: ValidationReport | None = None
    passed: bool = True
    exit_code: int = 0
