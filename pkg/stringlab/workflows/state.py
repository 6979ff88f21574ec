from __future__ import annotations

from typing import Dict, List

from typing_extensions import NotRequired, TypedDict

from stringlab.core.config import Settings
from stringlab.models.coeffs import ProblemSpec
from stringlab.models.limit import LimitEigendata
from stringlab.schemas.report import ConvergenceReport, RunSummary, ValidationReport
from stringlab.schemas.run import RunManifest
from stringlab.services.convergence_service import EpsResult


class RunState(TypedDict, total=False):
    """State handed from node to node during one laboratory run."""

    # Inputs.
    manifest: RunManifest
    settings: Settings

    # Resolved problem and its admissibility report.
    spec: ProblemSpec
    validation: NotRequired[ValidationReport]

    # Limit spectrum (with root-subspace bases for multiple eigenvalues when compared).
    limit_data: NotRequired[List[LimitEigendata]]

    # One entry per ε, ordered like the sweep grid.
    eps_results: NotRequired[List[EpsResult]]

    # Reduced tables, written files and the final verdict.
    report: NotRequired[ConvergenceReport]
    artifacts: NotRequired[List[str]]
    summary: NotRequired[RunSummary]
    exit_code: NotRequired[int]
    timings: NotRequired[Dict[str, float]]
