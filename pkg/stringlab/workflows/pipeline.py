from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Sequence

from stringlab.core.config import Settings
from stringlab.core.log import get_logger
from stringlab.models.coeffs import ProblemSpec, validate_spec
from stringlab.models.limit import LimitEigendata
from stringlab.repositories import plots
from stringlab.repositories.artifacts import ArtifactRepository
from stringlab.repositories.catalog import builtin_spec
from stringlab.repositories.spec_files import SpecRepository
from stringlab.schemas.report import ConvergenceReport, ResolventGapRow, RunSummary
from stringlab.schemas.run import RunManifest, SweepConfig
from stringlab.services.convergence_service import ConvergenceService, EpsResult
from stringlab.workflows.state import RunState

logger = get_logger(__name__)

Node = Callable[[RunState], RunState]


def _eps_task(
    settings: Settings,
    spec: ProblemSpec,
    eps: float,
    sweep: SweepConfig,
    data: Sequence[LimitEigendata],
    tasks: Sequence[str],
) -> EpsResult:
    """Work for one ε; module level so worker processes can import it."""
    service = ConvergenceService(settings)
    if "convergence" in tasks:
        return service.eps_result(spec, eps, sweep, data, with_resolvent="resolvent" in tasks)
    pairs = service.perturbed.perturbed_eigenvalues(spec, eps, sweep.n_track)
    result = EpsResult(eps=eps, lambdas=[p.lambda_eps for p in pairs], pairs=pairs)
    if "resolvent" in tasks:
        result.resolvent = service.resolvent_gap(spec, eps, sweep.zeta, sweep.resolvent_nodes)
    return result


def load_spec(state: RunState) -> RunState:
    """Resolve the manifest's spec and reject a real ζ that is not below both spectra."""
    manifest, settings = state["manifest"], state["settings"]
    if manifest.spec_path is not None:
        spec = SpecRepository(settings).load(manifest.spec_path)
    else:
        spec = builtin_spec(manifest.spec_name, manifest.seed)
    validation = validate_spec(spec, settings)
    if "resolvent" in manifest.tasks:
        ConvergenceService(settings).admit_zeta(spec, manifest.sweep.eps_grid, manifest.sweep.zeta)
    return {"spec": spec, "validation": validation}


def compute_limit(state: RunState) -> RunState:
    manifest = state["manifest"]
    if "limit" not in manifest.tasks:
        return {}
    service = ConvergenceService(state["settings"])
    if "convergence" in manifest.tasks:
        data = service.prepare(state["spec"], manifest.sweep)
    else:
        data = service.limit.limit_spectrum(state["spec"], manifest.sweep.n_track, with_basis=True)
    return {"limit_data": data}


def compute_sweep(state: RunState) -> RunState:
    """Per-ε computations, in worker processes when more than one worker is configured."""
    manifest, settings, spec = state["manifest"], state["settings"], state["spec"]
    if "perturbed" not in manifest.tasks:
        return {}
    grid = manifest.sweep.eps_grid
    data = state.get("limit_data", [])
    args = [(settings, spec, eps, manifest.sweep, data, manifest.tasks) for eps in grid]
    if settings.workers > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=min(settings.workers, len(grid))) as pool:
            results = list(pool.map(_eps_task, *zip(*args)))
    else:
        results = [_eps_task(*a) for a in args]
    return {"eps_results": results}


def assemble_report(state: RunState) -> RunState:
    manifest = state["manifest"]
    if "convergence" not in manifest.tasks:
        return {}
    service = ConvergenceService(state["settings"])
    report = service.assemble(state["spec"], manifest.sweep, state["limit_data"], state["eps_results"])
    return {"report": report}


def _report_plots(out: Path, report: ConvergenceReport) -> list[Path]:
    paths = []
    by_n: dict[str, tuple[list[float], list[float]]] = {}
    for row in report.pairs:
        eps, gaps = by_n.setdefault(f"n={row.n}", ([], []))
        eps.append(row.eps)
        gaps.append(row.gap)
    paths.append(plots.plot_convergence(out / "eigenvalue_gaps.svg", "|λ_n^ε − λ_n|", by_n))
    if report.hausdorff:
        series = {"d_H": ([r.eps for r in report.hausdorff], [r.distance for r in report.hausdorff])}
        paths.append(plots.plot_convergence(out / "hausdorff.svg", "truncated Hausdorff distance", series))
    if report.resolvent_gaps:
        series = {"‖R_ε − R‖": ([r.eps for r in report.resolvent_gaps], [r.gap for r in report.resolvent_gaps])}
        paths.append(plots.plot_convergence(out / "resolvent_gap.svg", "resolvent gap", series))
    if report.efun_gaps:
        by_efun: dict[str, tuple[list[float], list[float]]] = {}
        for row in report.efun_gaps:
            eps, gaps = by_efun.setdefault(f"n={row.n}", ([], []))
            eps.append(row.eps)
            gaps.append(row.gap)
        paths.append(plots.plot_convergence(out / "eigenfunction_gaps.svg", "eigenfunction gap", by_efun))
    if report.subspace_gaps:
        by_lam: dict[str, tuple[list[float], list[float]]] = {}
        for row in report.subspace_gaps:
            eps, gaps = by_lam.setdefault(f"λ={row.lam:.6g}", ([], []))
            eps.append(row.eps)
            gaps.append(row.gap)
        paths.append(plots.plot_convergence(out / "subspace_gaps.svg", "root subspace gap", by_lam))
    return paths


def write_artifacts(state: RunState) -> RunState:
    """CSV tables, optional SVG plots; writes happen here only, one after another."""
    manifest, settings = state["manifest"], state["settings"]
    repo = ArtifactRepository(manifest.outputs, settings.csv_digits)
    out = repo.ensure()
    svg: list[Path] = []
    results = state.get("eps_results", [])
    if results:
        repo.write_spectrum("spectrum", {r.eps: r.lambdas for r in results})
        smallest = min(results, key=lambda r: r.eps)
        for pair in smallest.pairs:
            repo.write_eigenfunction(f"eigenfunction_n{pair.index + 1}", pair)
    data = state.get("limit_data")
    if data:
        repo.write_limit_spectrum("limit_spectrum", data)
        for item in data:
            for k, vector in enumerate(item.basis):
                repo.write_limit_vector(f"limit_basis_n{item.first_index + 1}_{k + 1}_{vector.tag}", vector)
    report = state.get("report")
    if report is not None:
        for name, rows in report.tables().items():
            if rows:
                repo.write_models(name, rows, type(rows[0]))
        if manifest.fmt == "csv+svg":
            svg.extend(_report_plots(out, report))
            lambdas = {r.eps: r.lambdas for r in results}
            for lam in sorted({row.lam for row in report.clusters}):
                radius = next(row.radius for row in report.clusters if row.lam == lam)
                svg.append(plots.plot_cluster(out / f"cluster_{lam:.6f}.svg", lam, radius, lambdas))
    elif any(r.resolvent is not None for r in results):
        repo.write_models("resolvent_gaps", [r.resolvent for r in results if r.resolvent is not None], ResolventGapRow)
    artifacts = [str(p) for p in repo.written + svg]
    return {"artifacts": artifacts}


def finish(state: RunState) -> RunState:
    """Summary document and exit status: 1 when a hard criterion fails."""
    manifest, settings = state["manifest"], state["settings"]
    report = state.get("report")
    crit = report.criteria if report is not None else []
    passed = all(c.passed for c in crit if c.hard)
    exit_code = 0 if passed else 1
    repo = ArtifactRepository(manifest.outputs, settings.csv_digits)
    summary = RunSummary(
        spec_name=state["spec"].name,
        spec_path=manifest.spec_path,
        tasks=list(manifest.tasks),
        seed=manifest.seed,
        artifacts=sorted(Path(p).name for p in state.get("artifacts", [])),
        criteria=crit,
        validation=state.get("validation"),
        passed=passed,
        exit_code=exit_code,
    )
    repo.write_summary(summary)
    return {"summary": summary, "exit_code": exit_code}


NODES: tuple[tuple[str, Node], ...] = (
    ("load_spec", load_spec),
    ("limit", compute_limit),
    ("sweep", compute_sweep),
    ("report", assemble_report),
    ("artifacts", write_artifacts),
    ("finish", finish),
)


def run_pipeline(manifest: RunManifest, settings: Settings) -> RunState:
    """Run every node in order, merging each node's update into the state."""
    state: RunState = {"manifest": manifest, "settings": settings, "timings": {}}
    for name, node in NODES:
        started = time.perf_counter()
        state.update(node(state))
        state["timings"][name] = round(time.perf_counter() - started, 3)
        logger.info("run.node", node=name, elapsed=state["timings"][name])
    logger.info("run.finished", spec=state["spec"].name, exit_code=state["exit_code"], timings=state["timings"])
    return state
