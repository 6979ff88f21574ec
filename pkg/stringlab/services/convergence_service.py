from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.spatial.distance import directed_hausdorff

from stringlab.core.config import Settings, settings as default_settings
from stringlab.core.errors import ConfigurationError, DomainError, NumericalFailure
from stringlab.core.log import get_logger
from stringlab.engine import greens
from stringlab.engine.quadrature import composite_gauss
from stringlab.engine.slsolve import count_below, guard_spectrum
from stringlab.models.coeffs import ProblemSpec
from stringlab.models.grid import LimitVector
from stringlab.models.limit import LimitEigendata
from stringlab.models.perturbed import PerturbedEigenpair
from stringlab.schemas.report import (
    AnomalyRow,
    ClusterRow,
    ConvergenceReport,
    CriterionResult,
    EfunGapRow,
    GroundStateRow,
    HausdorffRow,
    PairRow,
    RateRow,
    ResolventGapRow,
    SubspaceGapRow,
)
from stringlab.schemas.run import SweepConfig
from stringlab.services.limit_service import LimitService, expand_multiplicity
from stringlab.services.perturbed_service import PerturbedService

logger = get_logger(__name__)

MIN_RATE_POINTS = 4
RESOLUTION_FLOOR = 1e2


# tables


def match_spectra(
    perturbed: Mapping[float, Sequence[float]],
    limit: Sequence[float],
    n_track: int,
    merge_tol: float = 1e-7,
) -> tuple[list[PairRow], list[AnomalyRow]]:
    """Pair λ_n^ε with λ_n by shared index; nearest-neighbour disagreements are anomalies.

    ``limit`` is counted with algebraic multiplicity. Indices in the rows are 1-based.
    """
    if len(limit) < n_track:
        raise ConfigurationError(f"limit list has {len(limit)} entries, {n_track} are tracked")
    distinct = np.unique(np.asarray(limit[:n_track], dtype=float))
    pairs: list[PairRow] = []
    anomalies: list[AnomalyRow] = []
    for eps, lams in perturbed.items():
        if len(lams) < n_track:
            raise ConfigurationError(f"perturbed list at eps={eps} has {len(lams)} entries, {n_track} are tracked")
        for n in range(n_track):
            lam_eps, lam = float(lams[n]), float(limit[n])
            pairs.append(PairRow(n=n + 1, eps=eps, lambda_eps=lam_eps, lambda_limit=lam, gap=abs(lam_eps - lam)))
            nearest = float(distinct[np.argmin(np.abs(distinct - lam_eps))])
            if abs(nearest - lam) > merge_tol * max(1.0, abs(lam)):
                anomalies.append(AnomalyRow(eps=eps, n=n + 1, index_match=lam, nearest_match=nearest))
    return pairs, anomalies


def fit_rate(eps: Sequence[float], gaps: Sequence[float], n: int = 0, eig_tol: float = 1e-9) -> RateRow:
    """Least-squares slope of log gap against log ε, with C_n = max gap/√ε."""
    eps_arr = np.asarray(eps, dtype=float)
    gap_arr = np.asarray(gaps, dtype=float)
    if eps_arr.shape != gap_arr.shape or len(eps_arr) < MIN_RATE_POINTS:
        raise ConfigurationError(f"fit_rate needs at least {MIN_RATE_POINTS} (eps, gap) points")
    constant = float(np.max(gap_arr / np.sqrt(eps_arr)))
    if np.any(gap_arr == 0.0):
        return RateRow(n=n, slope=None, constant=constant, points=len(eps_arr), status="exact_zero")
    if np.all(gap_arr < RESOLUTION_FLOOR * eig_tol):
        return RateRow(n=n, slope=None, constant=constant, points=len(eps_arr), status="converged_beyond_resolution")
    slope, _ = np.polyfit(np.log(eps_arr), np.log(gap_arr), 1)
    return RateRow(n=n, slope=float(slope), constant=constant, points=len(eps_arr))


def cluster_count(
    lam: float,
    mult: int,
    radius: float,
    perturbed: Mapping[float, Sequence[float]],
    limit_values: Iterable[float],
) -> list[ClusterRow]:
    """Perturbed eigenvalues within ``radius`` of a limit eigenvalue, per ε."""
    others = [mu for mu in limit_values if not math.isclose(mu, lam, rel_tol=1e-9, abs_tol=1e-12)]
    if others:
        half = 0.5 * min(abs(mu - lam) for mu in others)
        if not radius < half:
            raise ConfigurationError(f"radius {radius} reaches a neighbouring eigenvalue (half-distance {half:.4g})")
    rows = []
    for eps, lams in perturbed.items():
        count = int(np.sum(np.abs(np.asarray(lams, dtype=float) - lam) < radius))
        rows.append(ClusterRow(lam=lam, mult=mult, radius=radius, eps=eps, count=count))
    return rows


def hausdorff_truncated(first: Iterable[float], second: Iterable[float], cutoff: float) -> float:
    """Hausdorff distance between the parts of two spectra at or below ``cutoff``."""
    a = np.asarray([x for x in first if x <= cutoff], dtype=float).reshape(-1, 1)
    b = np.asarray([x for x in second if x <= cutoff], dtype=float).reshape(-1, 1)
    if not len(a) or not len(b):
        raise DomainError(f"no eigenvalues at or below the cutoff {cutoff}")
    return float(max(directed_hausdorff(a, b)[0], directed_hausdorff(b, a)[0]))


def detect_eps_monotone(eps_grid: Sequence[float], gaps: Sequence[float]) -> float | None:
    """Largest ε from which the gaps are nonincreasing down to the end of the grid."""
    k = len(gaps) - 1
    while k > 0 and gaps[k - 1] >= gaps[k]:
        k -= 1
    if k == len(gaps) - 1:
        return None
    return float(eps_grid[k])


def _orthonormal_columns(columns: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    q, r = np.linalg.qr(columns)
    if np.min(np.abs(np.diag(r))) <= tol * max(1.0, np.max(np.abs(np.diag(r)))):
        raise NumericalFailure("subspace basis is numerically rank deficient")
    return q


def projector_gap(first: np.ndarray, second: np.ndarray) -> float:
    """‖P₁ − P₂‖ for the spans of two column sets, both already in Euclidean geometry."""
    q1, q2 = _orthonormal_columns(first), _orthonormal_columns(second)
    r1 = q1 - q2 @ (q2.conj().T @ q1)
    r2 = q2 - q1 @ (q1.conj().T @ q2)
    return float(min(1.0, max(np.linalg.norm(r1, 2), np.linalg.norm(r2, 2))))


# per-ε results


@dataclass
class EpsResult:
    eps: float
    lambdas: list[float]
    pairs: list[PerturbedEigenpair] = field(default_factory=list)
    efun_gaps: list[EfunGapRow] = field(default_factory=list)
    subspace_gaps: list[SubspaceGapRow] = field(default_factory=list)
    resolvent: ResolventGapRow | None = None
    elapsed: float = 0.0


def ground_state_row(result: EpsResult) -> GroundStateRow:
    """λ₀^ε and the relative spread of the lowest eigenfunction over all three pieces."""
    pair = result.pairs[0]
    values = np.concatenate([np.real(g.value) for g in (pair.outer_left, pair.inner, pair.outer_right)])
    scale = float(np.max(np.abs(values)))
    deviation = float(np.ptp(values) / scale) if scale > 0 else float("inf")
    return GroundStateRow(eps=result.eps, lambda_eps=pair.lambda_eps, deviation=deviation)


class ConvergenceService:
    """Compares the ε-perturbed problem with the limit operator along an ε sweep."""

    def __init__(
        self,
        settings: Settings | None = None,
        perturbed: PerturbedService | None = None,
        limit: LimitService | None = None,
    ):
        self.settings = settings or default_settings
        self.perturbed = perturbed or PerturbedService(self.settings)
        self.limit = limit or LimitService(self.settings)

    # functions on (a, b)

    def _line_grid(self, spec: ProblemSpec, eps: float) -> tuple[np.ndarray, np.ndarray]:
        cuts = [-eps, 0.0, eps, *spec.q.breakpoints, *spec.r.breakpoints]
        return composite_gauss(
            spec.a, spec.b, 2 * self.settings.resolvent_nodes, cuts, self.settings.resolvent_min_panel_nodes
        )

    @staticmethod
    def embed(vector: LimitVector, x: np.ndarray) -> np.ndarray:
        """Limit vector as a function on (a, b): u on (a, 0), v on (0, b)."""
        out = np.zeros(x.shape, dtype=complex)
        left = x < 0
        out[left] = vector.u(x[left])
        out[~left] = vector.v(x[~left])
        return out

    def limit_function(self, spec: ProblemSpec, data: LimitEigendata) -> tuple[LimitVector, float | None]:
        """Limit of the n-th eigenfunction for a simple λ and the norm of its θ-scaled form."""
        if data.alg_mult != 1:
            raise ConfigurationError(f"λ={data.lam} has multiplicity {data.alg_mult}; use subspace_gap")
        (vector,) = self.limit.eigenvector_basis(spec, data)
        if not data.in_B:
            return vector, None
        theta = self.limit.theta_factor(spec, data.lam, vector.w)
        return vector, theta.limit_norm

    def eigenfunction_gap(
        self, spec: ProblemSpec, pair: PerturbedEigenpair, data: LimitEigendata
    ) -> EfunGapRow:
        """L₂(r, (a, b)) distance of the unit eigenfunction to its unit limit, signs aligned."""
        vector, limit_norm = self.limit_function(spec, data)
        x, w = self._line_grid(spec, pair.eps)
        mass = w * np.asarray(spec.r(x))
        y_eps = pair.evaluate(x).astype(complex)
        y_lim = self.embed(vector, x)
        y_eps /= np.sqrt(np.sum(mass * np.abs(y_eps) ** 2))
        y_lim /= np.sqrt(np.sum(mass * np.abs(y_lim) ** 2))
        sign = 1.0 if np.real(np.sum(mass * y_eps * np.conj(y_lim))) >= 0 else -1.0
        gap = float(np.sqrt(np.sum(mass * np.abs(y_eps - sign * y_lim) ** 2)))
        source = "Aa" if data.in_Aa else "Ab" if data.in_Ab else "B"
        return EfunGapRow(
            n=pair.index + 1, eps=pair.eps, lam=data.lam, gap=gap, source=source, limit_norm=limit_norm
        )

    def subspace_gap(
        self, spec: ProblemSpec, data: LimitEigendata, pairs: Sequence[PerturbedEigenpair]
    ) -> SubspaceGapRow:
        """Projector gap between the matched perturbed eigenfunctions and the embedded root subspace."""
        m = data.alg_mult
        if m not in (2, 3):
            raise ConfigurationError(f"subspace_gap needs multiplicity 2 or 3, got {m}")
        if len(pairs) != m:
            raise ConfigurationError(f"cluster at λ={data.lam} is incomplete ({len(pairs)} of {m})")
        if len(data.basis) != m:
            data = self.limit.attach_basis(spec, data)
        eps = pairs[0].eps
        x, w = self._line_grid(spec, eps)
        root = np.sqrt(w * np.asarray(spec.r(x)))[:, None]
        limit_cols = np.column_stack([self.embed(v, x) for v in data.basis]) * root
        eps_cols = np.column_stack([p.evaluate(x) for p in pairs]).astype(complex) * root
        return SubspaceGapRow(lam=data.lam, mult=m, eps=eps, gap=projector_gap(limit_cols, eps_cols))

    # resolvent

    def _resolvent_gap_at(
        self, spec: ProblemSpec, eps: float, zeta: complex, nodes: int, pieces: Sequence[str] | None
    ) -> float:
        disc = greens.discretize_space(spec, eps, nodes, self.settings.resolvent_min_panel_nodes)
        problems = (self.limit.problem_a(spec), self.limit.problem_b(spec), self.limit.problem_ab(spec))
        opts = self.perturbed.opts
        k_eps = greens.perturbed_resolvent_matrix(self.perturbed.chain(spec, eps), spec, disc, zeta, opts)
        k_lim = greens.limit_resolvent_matrix(problems, disc, zeta, opts)
        weighted = disc.weighted(k_eps - k_lim)
        if pieces is not None:
            weighted = greens.restrict_columns(weighted, disc, pieces)
        return greens.sigma_max(weighted)

    def check_zeta(self, spec: ProblemSpec, eps: float, zeta: complex) -> None:
        zeta = complex(zeta)
        chains = [self.perturbed.chain(spec, eps)]
        chains += [p.chain() for p in (self.limit.problem_a(spec), self.limit.problem_b(spec), self.limit.problem_ab(spec))]
        for chain in chains:
            guard_spectrum(chain, zeta, self.settings)

    def admit_zeta(self, spec: ProblemSpec, eps_grid: Sequence[float], zeta: complex) -> None:
        """A real ζ must lie below the limit spectrum and every perturbed spectrum of the sweep."""
        zeta = complex(zeta)
        if zeta.imag != 0.0:
            return
        top = zeta.real + self.settings.spectral_guard * max(1.0, abs(zeta.real))
        limits = (self.limit.problem_a(spec), self.limit.problem_b(spec), self.limit.problem_ab(spec))
        for problem in limits:
            if count_below(problem, top, self.settings):
                raise ConfigurationError(f"real ζ={zeta.real} is not below the spectrum of {problem.label}")
        for eps in eps_grid:
            if self.perturbed.perturbed_count_below(spec, eps, top):
                raise ConfigurationError(f"real ζ={zeta.real} is not below the perturbed spectrum at ε={eps}")

    def resolvent_gap(
        self,
        spec: ProblemSpec,
        eps: float,
        zeta: complex = 1j,
        nodes: int | None = None,
        pieces: Sequence[str] | None = None,
    ) -> ResolventGapRow:
        """σ_max of the weighted kernel difference, checked by doubling the number of nodes."""
        started = time.perf_counter()
        zeta = complex(zeta)
        self.check_zeta(spec, eps, zeta)
        nodes = nodes or self.settings.resolvent_nodes
        coarse = self._resolvent_gap_at(spec, eps, zeta, nodes, pieces)
        fine = self._resolvent_gap_at(spec, eps, zeta, 2 * nodes, pieces)
        resolved = abs(fine - coarse) <= self.settings.resolvent_doubling_rtol * fine
        if not resolved:
            logger.warning("resolvent.under_resolved", eps=eps, coarse=coarse, fine=fine, nodes=nodes)
        logger.info(
            "resolvent.gap", eps=eps, gap=fine, resolved=resolved, elapsed=round(time.perf_counter() - started, 3)
        )
        return ResolventGapRow(
            eps=eps, zeta_re=zeta.real, zeta_im=zeta.imag, gap=fine, gap_coarse=coarse, resolved=resolved, nodes=2 * nodes
        )

    # sweep

    def limit_below(self, spec: ProblemSpec, cutoff: float) -> list[float]:
        """Limit spectrum at or below ``cutoff``, with multiplicity."""
        n = sum(
            count_below(p, cutoff, self.settings)
            for p in (self.limit.problem_a(spec), self.limit.problem_b(spec), self.limit.problem_ab(spec))
        )
        if n == 0:
            return []
        return [lam for lam in expand_multiplicity(self.limit.limit_spectrum(spec, n)) if lam <= cutoff]

    def tracked_count(self, data: Sequence[LimitEigendata]) -> int:
        return sum(d.alg_mult for d in data)

    def eps_result(
        self,
        spec: ProblemSpec,
        eps: float,
        config: SweepConfig,
        data: Sequence[LimitEigendata],
        with_resolvent: bool = True,
    ) -> EpsResult:
        """Every ε-dependent quantity of the sweep; independent across ε."""
        started = time.perf_counter()
        self.perturbed.check_eps(spec, eps)
        tracked = self.tracked_count(data)
        wanted = max(tracked, self.perturbed.perturbed_count_below(spec, eps, config.truncation))
        pairs = self.perturbed.perturbed_eigenvalues(spec, eps, wanted)
        result = EpsResult(eps=eps, lambdas=[p.lambda_eps for p in pairs], pairs=pairs[: config.n_track])
        for item in data:
            if item.alg_mult == 1:
                if item.first_index < config.n_track:
                    result.efun_gaps.append(self.eigenfunction_gap(spec, pairs[item.first_index], item))
            else:
                cluster = [pairs[i] for i in item.indices]
                result.subspace_gaps.append(self.subspace_gap(spec, item, cluster))
        if with_resolvent:
            result.resolvent = self.resolvent_gap(spec, eps, config.zeta, config.resolvent_nodes)
        result.elapsed = round(time.perf_counter() - started, 3)
        logger.info("convergence.eps_done", spec=spec.name, eps=eps, tracked=tracked, elapsed=result.elapsed)
        return result

    def prepare(self, spec: ProblemSpec, config: SweepConfig) -> list[LimitEigendata]:
        data = self.limit.limit_spectrum(spec, config.n_track)
        return [self.limit.attach_basis(spec, d) if d.alg_mult > 1 else d for d in data]

    def _radius(self, lam: float, distinct: Sequence[float], config: SweepConfig) -> float:
        if config.cluster_radius is not None:
            return config.cluster_radius
        others = [abs(mu - lam) for mu in distinct if mu != lam]
        return 0.25 * min(others) if others else 1.0

    def assemble(
        self,
        spec: ProblemSpec,
        config: SweepConfig,
        data: Sequence[LimitEigendata],
        results: Sequence[EpsResult],
    ) -> ConvergenceReport:
        """Reduce the per-ε results into the report tables and criterion flags."""
        results = sorted(results, key=lambda r: -r.eps)
        eps_grid = [r.eps for r in results]
        limit_list = expand_multiplicity(data)
        perturbed = {r.eps: r.lambdas for r in results}
        pairs, anomalies = match_spectra(perturbed, limit_list, config.n_track, self.settings.merge_tol)
        report = ConvergenceReport(spec_name=spec.name, eps_grid=eps_grid, pairs=pairs, anomalies=anomalies)

        for n in range(1, config.n_track + 1):
            gaps = [row.gap for row in pairs if row.n == n]
            report.eps_monotone[n] = detect_eps_monotone(eps_grid, gaps)
            if len(eps_grid) >= MIN_RATE_POINTS:
                report.rates.append(fit_rate(eps_grid, gaps, n, self.settings.eig_tol))

        below = self.limit_below(spec, config.truncation)
        distinct_all = sorted({d.lam for d in data} | set(below))
        for item in data:
            if item.alg_mult > 1:
                radius = self._radius(item.lam, distinct_all, config)
                report.clusters.extend(cluster_count(item.lam, item.alg_mult, radius, perturbed, distinct_all))
        for r in results:
            report.efun_gaps.extend(r.efun_gaps)
            report.subspace_gaps.extend(r.subspace_gaps)
            if r.resolvent is not None:
                report.resolvent_gaps.append(r.resolvent)
            try:
                distance = hausdorff_truncated(r.lambdas, below, config.truncation)
            except DomainError:
                logger.warning("convergence.hausdorff_skipped", eps=r.eps, cutoff=config.truncation)
                continue
            report.hausdorff.append(HausdorffRow(eps=r.eps, cutoff=config.truncation, distance=distance))
        if spec.is_free_string:
            report.ground_state = [ground_state_row(r) for r in results if r.pairs]
        report.criteria = criteria(report, self.settings)
        logger.info(
            "convergence.sweep",
            spec=spec.name,
            eps=len(eps_grid),
            anomalies=len(anomalies),
            passed=all(c.passed for c in report.criteria if c.hard),
        )
        return report

    def sweep(self, spec: ProblemSpec, config: SweepConfig, with_resolvent: bool = True) -> ConvergenceReport:
        data = self.prepare(spec, config)
        results = [self.eps_result(spec, eps, config, data, with_resolvent) for eps in config.eps_grid]
        return self.assemble(spec, config, data, results)


# criteria


def _criterion(name: str, passed: bool, detail: str, hard: bool = True) -> CriterionResult:
    return CriterionResult(name=name, passed=bool(passed), hard=hard, detail=detail)


def _gap_series(rows, key) -> dict:
    series: dict = {}
    for row in sorted(rows, key=lambda r: -r.eps):
        series.setdefault(key(row), []).append(row.gap)
    return series


def _converging(series: dict, slack: float, limit: float) -> list:
    """Keys whose gap grows somewhere along decreasing ε or ends at or above ``limit``."""
    bad = []
    for key, gaps in series.items():
        growing = any(b > a + slack for a, b in zip(gaps, gaps[1:]))
        if growing or gaps[-1] >= limit:
            bad.append(key)
    return bad


def criteria(report: ConvergenceReport, settings: Settings | None = None) -> list[CriterionResult]:
    """Pass/fail flags; only hard ones decide the exit status."""
    settings = settings or default_settings
    floor = RESOLUTION_FLOOR * settings.eig_tol
    out: list[CriterionResult] = []
    eps_max, eps_min = max(report.eps_grid), min(report.eps_grid)

    if len(report.eps_grid) > 1:
        worst, slow = [], []
        for n in sorted({row.n for row in report.pairs}):
            gaps = {row.eps: row.gap for row in report.pairs if row.n == n}
            if gaps[eps_min] > gaps[eps_max] + floor:
                worst.append(n)
            if gaps[eps_min] > 0.1 * gaps[eps_max] + floor or gaps[eps_min] >= 0.05 + floor:
                slow.append(n)
        out.append(_criterion("eigenvalue_gaps_shrink", not worst, f"growing for n={worst}" if worst else "ok"))
        out.append(
            _criterion(
                "eigenvalue_gaps_factor_10",
                not slow,
                f"eps {eps_max} -> {eps_min}; short for n={slow}" if slow else "ok",
            )
        )

    if report.clusters:
        smallest = sorted(report.eps_grid)[:2]
        bad = [(row.lam, row.eps, row.count) for row in report.clusters if row.eps in smallest and row.count != row.mult]
        out.append(_criterion("clusters_match_multiplicity", not bad, f"mismatches {bad}" if bad else "ok"))

    if len(report.hausdorff) > 1:
        by_eps = {row.eps: row.distance for row in report.hausdorff}
        first, last = by_eps[max(by_eps)], by_eps[min(by_eps)]
        out.append(_criterion("hausdorff_decreases", last <= first + floor, f"{first:.3e} -> {last:.3e}"))
        out.append(_criterion("hausdorff_factor_3", last * 3 <= first + floor, f"{first:.3e} -> {last:.3e}"))

    if len(report.eps_grid) > 1:
        slack = settings.resid_tol
        outer = _gap_series([r for r in report.efun_gaps if r.source != "B"], lambda r: r.n)
        if outer:
            bad = _converging(outer, slack, 0.1)
            detail = f"not converging for n={bad}" if bad else "ok"
            out.append(_criterion("eigenfunction_gaps_converge", not bad, detail))
        middle = _gap_series([r for r in report.efun_gaps if r.source == "B"], lambda r: r.n)
        if middle:
            bad = _converging(middle, slack, 0.1)
            out.append(
                _criterion(
                    "eigenfunction_gaps_converge_B",
                    not bad,
                    f"not converging for n={bad}" if bad else "ok",
                    hard=False,
                )
            )
        subspaces = _gap_series(report.subspace_gaps, lambda r: round(r.lam, 9))
        if subspaces:
            bad = _converging(subspaces, slack, 0.1)
            out.append(_criterion("subspace_gaps_converge", not bad, f"not converging at λ={bad}" if bad else "ok"))

    if report.ground_state:
        off = [r.eps for r in report.ground_state if abs(r.lambda_eps) > settings.eig_tol]
        bent = [r.eps for r in report.ground_state if r.deviation > settings.resid_tol]
        detail = f"λ₀ off zero at {off}; non-constant at {bent}" if off or bent else "ok"
        out.append(_criterion("neumann_ground_state", not off and not bent, detail))

    if report.resolvent_gaps:
        rows = sorted(report.resolvent_gaps, key=lambda r: -r.eps)
        c = rows[0].gap / math.sqrt(rows[0].eps)
        over = [r.eps for r in rows[1:] if r.gap > 1.25 * c * math.sqrt(r.eps)]
        out.append(_criterion("resolvent_sqrt_eps_bound", not over, f"C={c:.4g}; above bound at {over}"))
        unresolved = [r.eps for r in rows if not r.resolved]
        out.append(_criterion("resolvent_resolved", not unresolved, f"under-resolved at {unresolved}"))
        steps = [
            (b.gap / a.gap, 1.25 * max(0.71, math.sqrt(b.eps / a.eps))) for a, b in zip(rows, rows[1:]) if a.gap > 0
        ][-3:]
        out.append(
            _criterion(
                "resolvent_halving_ratio",
                all(ratio <= bound for ratio, bound in steps),
                f"ratios {[round(ratio, 4) for ratio, _ in steps]}",
            )
        )
    return out
