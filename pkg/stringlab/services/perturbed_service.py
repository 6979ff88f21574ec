from __future__ import annotations

import time

import numpy as np

from stringlab.core.config import Settings, settings as default_settings
from stringlab.core.errors import DomainError, NumericalFailure
from stringlab.core.log import get_logger
from stringlab.engine import fem_oracle
from stringlab.engine.shooting import (
    Chain,
    OdeOptions,
    Segment,
    characteristic,
    count_below,
    eigenfunction_samples,
    integrate_segment,
    locate_eigenvalues,
    right_form_value,
    shoot,
    transfer_matrices,
)
from stringlab.engine.slsolve import guard_spectrum, integrated_residual
from stringlab.models.coeffs import ProblemSpec
from stringlab.models.grid import GridFunction, LimitVector
from stringlab.models.perturbed import PerturbedEigenpair, TransferMatrix

logger = get_logger(__name__)


def merge_grids(*grids: np.ndarray) -> np.ndarray:
    return np.unique(np.concatenate(grids))


class PerturbedService:
    """Spectrum, eigenfunctions and resolvent of the ε-perturbed string."""

    def __init__(self, settings: Settings | None = None):
        self.settings = settings or default_settings
        self.opts = OdeOptions.from_settings(self.settings)

    def check_eps(self, spec: ProblemSpec, eps: float) -> None:
        limit = 0.5 * spec.max_eps
        if not self.settings.min_eps <= eps < limit:
            raise DomainError(
                f"eps={eps} must lie in [{self.settings.min_eps}, {limit}) for interval ({spec.a}, {spec.b})"
            )

    def chain(self, spec: ProblemSpec, eps: float) -> Chain:
        """Outer piece (a, −ε), rescaled inner piece (−1, 1), outer piece (ε, b)."""
        self.check_eps(spec, eps)
        inner_q = spec.q.pullback(eps, 0.0, eps * eps)
        segments = (
            Segment(spec.a, -eps, spec.q, spec.r, label="outer_left"),
            Segment(-1.0, 1.0, inner_q, spec.h, scale=eps, measure=eps, label="inner"),
            Segment(eps, spec.b, spec.q, spec.r, label="outer_right"),
        )
        return Chain(segments, spec.left_form(), spec.right_form(), match_segment=1, match_point=0.0)

    def perturbed_eigenvalues(self, spec: ProblemSpec, eps: float, n_max: int) -> list[PerturbedEigenpair]:
        started = time.perf_counter()
        if n_max < 1:
            raise DomainError("n_max must be at least 1")
        chain = self.chain(spec, eps)
        lams = locate_eigenvalues(chain, n_max, self.settings)
        gaps = np.diff(lams)
        if gaps.size and np.min(gaps) <= 10 * self.settings.eig_tol:
            raise NumericalFailure(f"perturbed eigenvalues not separated at eps={eps}")
        pairs = [self._eigenpair(chain, n, lam, eps) for n, lam in enumerate(lams)]
        logger.info(
            "perturbed.eigenvalues",
            spec=spec.name,
            eps=eps,
            n_max=n_max,
            elapsed=round(time.perf_counter() - started, 3),
        )
        return pairs

    def _eigenpair(self, chain: Chain, n: int, lam: float, eps: float) -> PerturbedEigenpair:
        left, inner, right = eigenfunction_samples(chain, lam, self.settings)
        pair = PerturbedEigenpair(
            index=n,
            eps=eps,
            lambda_eps=lam,
            outer_left=GridFunction(left.t, left.y, left.d, "outer_left"),
            inner=GridFunction(inner.t, inner.y, inner.d, "inner"),
            outer_right=GridFunction(right.t, right.y, right.d, "outer_right"),
        )
        scale = max(pair.outer_left.max_abs(), pair.inner.max_abs(), pair.outer_right.max_abs())
        resid = pair.max_coupling_residual / scale
        if resid > self.settings.coupling_tol:
            raise NumericalFailure(f"coupling residual {resid:.2e} for index {n} at eps={eps}")
        return pair

    def perturbed_count_below(self, spec: ProblemSpec, eps: float, lam: float) -> int:
        return count_below(self.chain(spec, eps), lam, self.opts)

    def eigenvalues_below(self, spec: ProblemSpec, eps: float, cutoff: float) -> list[float]:
        """Every perturbed eigenvalue ≤ cutoff."""
        count = count_below(self.chain(spec, eps), cutoff, self.opts)
        if count == 0:
            return []
        return locate_eigenvalues(self.chain(spec, eps), count, self.settings)

    def characteristic_function(self, spec: ProblemSpec, eps: float, lam: float) -> float:
        return characteristic(self.chain(spec, eps), lam, self.opts)

    def transfer_matrices(self, spec: ProblemSpec, eps: float, lam: complex) -> list[TransferMatrix]:
        chain = self.chain(spec, eps)
        return [
            TransferMatrix(seg.label, m)
            for seg, m in zip(chain.segments, transfer_matrices(chain, lam, self.opts))
        ]

    def oracle_eigenvalues(
        self, spec: ProblemSpec, eps: float, k: int, elements: int = 4000, extrapolate: bool = True
    ) -> np.ndarray:
        self.check_eps(spec, eps)
        return fem_oracle.perturbed_oracle_eigenvalues(spec, eps, k, elements, extrapolate)

    def grids(self, spec: ProblemSpec, eps: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Sampling grids of ℒ: (a, 0) and (0, b) include the points ±ε."""
        chain = self.chain(spec, eps)
        n = self.settings.grid_points
        ext = max(64, n // 8)
        left, inner, right = chain.segments
        return (
            merge_grids(left.grid(n), np.linspace(-eps, 0.0, ext)),
            inner.grid(n),
            merge_grids(np.linspace(0.0, eps, ext), right.grid(n)),
        )

    def apply_perturbed_resolvent(
        self, spec: ProblemSpec, eps: float, zeta: complex, F: LimitVector
    ) -> LimitVector:
        """(𝒜_ε − ζ)⁻¹F in the coordinates of ℒ.

        The outer components are the solutions on (a, −ε) and (ε, b) continued
        as solutions of the outer equations up to the origin.
        """
        zeta = complex(zeta)
        chain = self.chain(spec, eps)
        grid_a, grid_0, grid_b = self.grids(spec, eps)
        if not (np.any(F.u.value) or np.any(F.w.value) or np.any(F.v.value)):
            return LimitVector(
                GridFunction.zeros(grid_a, "a", complex),
                GridFunction.zeros(grid_0, "0", complex),
                GridFunction.zeros(grid_b, "b", complex),
                tag="resolvent",
            )
        guard_spectrum(chain, zeta, self.settings)

        particular = shoot(chain, zeta, (0.0, 0.0), self.opts, "forward", forcing=[F.u, F.w, F.v])
        homog = shoot(chain, zeta, chain.left_vector, self.opts, "forward")
        lh = right_form_value(homog)
        if lh == 0:
            raise NumericalFailure("homogeneous solution satisfies both end conditions")
        full = particular.plus(homog, -right_form_value(particular) / lh)

        seg_l, seg_0, seg_r = chain.segments
        y_l, d_l = full.physical_state(0, seg_l.grid(self.settings.grid_points))
        y_0, d_0 = full.state(1, grid_0)
        y_r, d_r = full.physical_state(2, seg_r.grid(self.settings.grid_points))

        ext_l = Segment(-eps, 0.0, spec.q, spec.r)
        ext_r = Segment(0.0, eps, spec.q, spec.r)
        start_l = (y_l[-1], d_l[-1])
        start_r = (y_r[0], d_r[0])
        sol_l = integrate_segment(ext_l, zeta, -eps, start_l, 0.0, self.opts, F.u)
        sol_r = integrate_segment(ext_r, zeta, eps, start_r, 0.0, self.opts, F.v)

        u = self._glue(seg_l.grid(self.settings.grid_points), y_l, d_l, sol_l, grid_a, after=True)
        v = self._glue(seg_r.grid(self.settings.grid_points), y_r, d_r, sol_r, grid_b, after=False)
        w = GridFunction(grid_0, y_0, d_0, "0")
        result = LimitVector(u, w, v, tag="resolvent")

        resid = max(
            integrated_residual(spec.q, spec.r, zeta, u, np.asarray(F.u(u.x))),
            integrated_residual(seg_0.q, spec.h, zeta, w, np.asarray(F.w(w.x))),
            integrated_residual(spec.q, spec.r, zeta, v, np.asarray(F.v(v.x))),
        )
        if resid > self.settings.resid_tol:
            raise NumericalFailure(f"perturbed resolvent residual {resid:.2e} exceeds tolerance")
        return result

    @staticmethod
    def _glue(
        grid: np.ndarray,
        y: np.ndarray,
        d: np.ndarray,
        ext,
        full_grid: np.ndarray,
        after: bool,
    ) -> GridFunction:
        """Combine the outer samples with the continuation towards the origin on ``full_grid``."""
        y_full = np.empty(full_grid.shape, dtype=complex)
        d_full = np.empty(full_grid.shape, dtype=complex)
        on_outer = np.isin(full_grid, grid)
        y_full[on_outer] = y
        d_full[on_outer] = d
        rest = ~on_outer
        y_ext, d_ext = ext.at(full_grid[rest])
        y_full[rest] = y_ext
        d_full[rest] = d_ext
        return GridFunction(full_grid, y_full, d_full, "a" if after else "b")

    def resolvent_residuals(
        self, spec: ProblemSpec, eps: float, zeta: complex, F: LimitVector, Y: LimitVector
    ) -> dict[str, float]:
        """Residuals of (𝒜_ε − ζ)Y = F: equations, end conditions and the four couplings."""
        inner_q = spec.q.pullback(eps, 0.0, eps * eps)
        ca, sa = spec.left_form()
        cb, sb = spec.right_form()
        u, w, v = Y.u, Y.w, Y.v
        return {
            "eq_a": integrated_residual(spec.q, spec.r, zeta, u, np.asarray(F.u(u.x))),
            "eq_0": integrated_residual(inner_q, spec.h, zeta, w, np.asarray(F.w(w.x))),
            "eq_b": integrated_residual(spec.q, spec.r, zeta, v, np.asarray(F.v(v.x))),
            "ell_a": abs(ca * u.value[0] + sa * u.deriv[0]),
            "ell_b": abs(cb * v.value[-1] + sb * v.deriv[-1]),
            "value(-eps)": abs(u(-eps) - w.value[0]),
            "value(+eps)": abs(v(eps) - w.value[-1]),
            "deriv(-eps)": abs(eps * u.derivative(-eps) - w.deriv[0]),
            "deriv(+eps)": abs(eps * v.derivative(eps) - w.deriv[-1]),
        }
