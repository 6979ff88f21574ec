from __future__ import annotations

import time
from dataclasses import replace

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

from stringlab.core.config import Settings, settings as default_settings
from stringlab.core.errors import ConfigurationError, DegenerateDataError, DomainError, NumericalFailure
from stringlab.core.log import get_logger
from stringlab.engine.shooting import OdeOptions, shoot
from stringlab.engine.slsolve import (
    DIRICHLET,
    NEUMANN,
    DirichletValue,
    Eigenpair,
    Robin,
    SLProblem,
    count_below,
    eigenvalues,
    guard_spectrum,
    integrated_residual,
    sample_solution,
    solve_boundary,
    solve_nonhomogeneous,
)
from stringlab.models.coeffs import CoefficientFunction, ConstantCoefficient, ProblemSpec
from stringlab.models.grid import GridFunction, LimitVector
from stringlab.models.limit import EigenKind, LimitEigendata, RootVectorData, ThetaFactor

logger = get_logger(__name__)

ZERO = ConstantCoefficient(0.0)


def classify(in_Aa: bool, in_B: bool, in_Ab: bool) -> EigenKind:
    """Multiplicity structure of a limit eigenvalue from its membership flags."""
    count = int(in_Aa) + int(in_B) + int(in_Ab)
    if count == 0:
        raise DomainError("classify needs at least one membership flag")
    if count == 1:
        return EigenKind.SIMPLE
    if count == 3:
        return EigenKind.TRIPLE_JORDAN
    if not in_B:
        return EigenKind.DOUBLE_DIAGONAL
    return EigenKind.DOUBLE_JORDAN


def expand_multiplicity(data: list[LimitEigendata]) -> list[float]:
    """Limit eigenvalues repeated according to algebraic multiplicity."""
    return [d.lam for d in data for _ in range(d.alg_mult)]


def _ode_residual_norm(
    q: CoefficientFunction, weight: CoefficientFunction, lam: float, gf: GridFunction, forcing: np.ndarray
) -> float:
    """L₂(weight) size of the integrated residuals of y' = d, d' = (q − λw)y − w f."""
    x, y, d = gf.x, gf.value, gf.deriv
    w = np.asarray(weight(x))
    dd = (np.asarray(q(x)) - lam * w) * y - w * forcing
    r1 = y - y[0] - cumulative_simpson(d, x=x, initial=0.0)
    r2 = d - d[0] - cumulative_simpson(dd, x=x, initial=0.0)
    return float(np.sqrt(simpson(w * (np.abs(r1) ** 2 + np.abs(r2) ** 2), x=x)))


class LimitService:
    """Spectrum, root subspaces and resolvent of the limit operator 𝒜."""

    def __init__(self, settings: Settings | None = None):
        self.settings = settings or default_settings
        self.opts = OdeOptions.from_settings(self.settings)

    # sub-problems

    def problem_a(self, spec: ProblemSpec, trace: complex | None = None) -> SLProblem:
        right = DIRICHLET if trace is None else DirichletValue(trace)
        return SLProblem(spec.a, 0.0, spec.q, spec.r, Robin.from_angle(spec.alpha), right, label="Aa")

    def problem_b(self, spec: ProblemSpec) -> SLProblem:
        return SLProblem(-1.0, 1.0, ZERO, spec.h, NEUMANN, NEUMANN, label="B")

    def problem_ab(self, spec: ProblemSpec, trace: complex | None = None) -> SLProblem:
        left = DIRICHLET if trace is None else DirichletValue(trace)
        return SLProblem(0.0, spec.b, spec.q, spec.r, left, Robin.from_angle(spec.beta), label="Ab")

    def grids(self, spec: ProblemSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (
            self.problem_a(spec).grid(self.settings),
            self.problem_b(spec).grid(self.settings),
            self.problem_ab(spec).grid(self.settings),
        )

    def sub_spectra(self, spec: ProblemSpec, n_max: int) -> dict[str, list[Eigenpair]]:
        return {
            "Aa": eigenvalues(self.problem_a(spec), n_max, self.settings),
            "B": eigenvalues(self.problem_b(spec), n_max, self.settings),
            "Ab": eigenvalues(self.problem_ab(spec), n_max, self.settings),
        }

    # spectrum

    def limit_spectrum(self, spec: ProblemSpec, n_max: int, with_basis: bool = False) -> list[LimitEigendata]:
        """Merged σ(A_a) ∪ σ(B) ∪ σ(A_b) covering the first ``n_max`` entries counted with multiplicity."""
        started = time.perf_counter()
        subs = self.sub_spectra(spec, n_max)
        cap = min(pairs[-1].lam for pairs in subs.values())
        tagged = sorted(
            ((pair.lam, source, pair) for source, pairs in subs.items() for pair in pairs),
            key=lambda item: item[0],
        )
        groups: list[list[tuple[float, str, Eigenpair]]] = []
        for item in tagged:
            lam = item[0]
            if groups:
                ref = groups[-1][0][0]
                if abs(lam - ref) <= self.settings.merge_tol * max(1.0, abs(ref)):
                    groups[-1].append(item)
                    continue
            groups.append([item])

        data: list[LimitEigendata] = []
        position = 0
        for group in groups:
            lam = float(np.mean([item[0] for item in group]))
            if lam > cap * (1 + self.settings.merge_tol) + self.settings.merge_tol or position >= n_max:
                break
            by_source = {source: pair for _, source, pair in group}
            if len(by_source) != len(group):
                raise NumericalFailure(f"sub-spectrum has a repeated eigenvalue near {lam}")
            flags = ("Aa" in by_source, "B" in by_source, "Ab" in by_source)
            item = LimitEigendata(
                lam=lam,
                in_Aa=flags[0],
                in_B=flags[1],
                in_Ab=flags[2],
                kind=classify(*flags),
                first_index=position,
                u_pair=by_source.get("Aa"),
                w_pair=by_source.get("B"),
                v_pair=by_source.get("Ab"),
            )
            if with_basis:
                item = self.attach_basis(spec, item)
            data.append(item)
            position += item.alg_mult
        logger.info(
            "limit.spectrum",
            spec=spec.name,
            n_max=n_max,
            distinct=len(data),
            multiple=sum(1 for d in data if d.alg_mult > 1),
            elapsed=round(time.perf_counter() - started, 3),
        )
        return data

    # eigenvectors and root vectors

    def _zero_vector(self, spec: ProblemSpec, tag: str) -> LimitVector:
        ga, g0, gb = self.grids(spec)
        return LimitVector(GridFunction.zeros(ga, "a"), GridFunction.zeros(g0, "0"), GridFunction.zeros(gb, "b"), tag)

    def boundary_pieces(self, spec: ProblemSpec, zeta: complex, w: GridFunction) -> tuple[GridFunction, GridFunction]:
        """T_a(ζ)w and T_b(ζ)w: outer solutions with traces w(−1) at 0⁻ and w(1) at 0⁺."""
        ta = solve_boundary(self.problem_a(spec, trace=w.value[0]), zeta, settings=self.settings).sol
        tb = solve_boundary(self.problem_ab(spec, trace=w.value[-1]), zeta, settings=self.settings).sol
        return ta, tb

    def eigenvector_basis(self, spec: ProblemSpec, data: LimitEigendata) -> list[LimitVector]:
        """Eigenvectors spanning ker(𝒜 − λ), each of unit ℒ-norm."""
        zero = self._zero_vector(spec, "eigenvector")
        vectors: list[LimitVector] = []
        if data.in_Aa:
            vectors.append(replace(zero, u=self._pair(data.u_pair, "Aa", spec, data.lam).efun))
        if data.in_Ab:
            vectors.append(replace(zero, v=self._pair(data.v_pair, "Ab", spec, data.lam).efun))
        if data.in_B and not (data.in_Aa or data.in_Ab):
            w = self._pair(data.w_pair, "B", spec, data.lam).efun
            ta, tb = self.boundary_pieces(spec, data.lam, w)
            vec = LimitVector(_real(ta), w, _real(tb), "eigenvector")
            vectors.append(vec.scaled(1.0 / vec.norm(spec.r, spec.h)))
        return vectors

    def _pair(self, pair: Eigenpair | None, source: str, spec: ProblemSpec, lam: float) -> Eigenpair:
        if pair is not None:
            return pair
        problem = {"Aa": self.problem_a, "B": self.problem_b, "Ab": self.problem_ab}[source](spec)
        for candidate in eigenvalues(problem, 1 + _index_guess(problem, lam, self.settings), self.settings):
            if abs(candidate.lam - lam) <= self.settings.merge_tol * max(1.0, abs(lam)):
                return candidate
        raise DomainError(f"λ={lam} is not an eigenvalue of {source}")

    def root_vector(self, spec: ProblemSpec, data: LimitEigendata) -> RootVectorData:
        """Root vector of a Jordan chain of length two at λ."""
        if not data.is_jordan:
            raise ConfigurationError(f"λ={data.lam} of kind {data.kind.value} has no root vectors")
        lam = data.lam
        tol = self.settings.degeneracy_tol
        w = self._pair(data.w_pair, "B", spec, lam).efun
        w_left, w_right = float(w.value[0]), float(w.value[-1])
        for name, value in (("w_lambda(-1)", w_left), ("w_lambda(1)", w_right)):
            if abs(value) < tol:
                raise DegenerateDataError(name, value)

        zero = self._zero_vector(spec, "eigenvector")
        u_eig = self._pair(data.u_pair, "Aa", spec, lam).efun if data.in_Aa else None
        v_eig = self._pair(data.v_pair, "Ab", spec, lam).efun if data.in_Ab else None
        du = float(u_eig.deriv[-1]) if u_eig is not None else None
        dv = float(v_eig.deriv[0]) if v_eig is not None else None
        if du is not None and abs(du) < tol:
            raise DegenerateDataError("u_lambda'(0)", du)
        if dv is not None and abs(dv) < tol:
            raise DegenerateDataError("v_lambda'(0)", dv)

        if data.kind == EigenKind.TRIPLE_JORDAN:
            c2 = 1.0
            c1 = -(w_left * du) / (w_right * dv) * c2
            c0 = c1 / (w_left * du)
        elif data.in_Aa:
            c1, c2 = 1.0, 0.0
            c0 = 1.0 / (w_left * du)
        else:
            c1, c2 = 0.0, 1.0
            c0 = -1.0 / (w_right * dv)

        if u_eig is not None:
            u = self._forced_outer(self.problem_a(spec), lam, c1, u_eig, "forward")
        else:
            u = _real(solve_boundary(self.problem_a(spec, trace=c0 * w_left), lam, settings=self.settings).sol)
        if v_eig is not None:
            v = self._forced_outer(self.problem_ab(spec), lam, c2, v_eig, "backward")
        else:
            v = _real(solve_boundary(self.problem_ab(spec, trace=c0 * w_right), lam, settings=self.settings).sol)
        root = LimitVector(u, w.scaled(c0), v, "root")

        target = zero
        if u_eig is not None:
            target = replace(target, u=u_eig.scaled(c1))
        if v_eig is not None:
            target = replace(target, v=v_eig.scaled(c2))
        target = replace(target, tag="eigenvector")

        residual = self.jordan_residual(spec, lam, root, target)
        if residual > self.settings.jordan_tol:
            raise NumericalFailure(f"Jordan residual {residual:.2e} exceeds tolerance at λ={lam}")
        result = RootVectorData(
            c0=c0,
            root=root,
            target=target,
            residual=residual,
            obstruction=self.second_chain_obstruction(spec, root, w),
            c1=c1,
            c2=c2,
        )
        logger.info("limit.root_vector", lam=lam, kind=data.kind.value, c0=c0, residual=residual)
        return result

    def _forced_outer(
        self, problem: SLProblem, lam: float, coeff: float, eig: GridFunction, direction: str
    ) -> GridFunction:
        """Solution of −u'' + q u − λ r u = coeff·r·eig satisfying the Robin end, made ⊥ eig."""
        chain = problem.chain()
        particular = shoot(chain, lam, (0.0, 0.0), self.opts, direction, forcing=[eig.scaled(coeff)])
        sol = _real(sample_solution(particular, 0, eig.x, problem.label))
        overlap = sol.inner(eig, problem.weight)
        return sol - eig.scaled(overlap)

    def second_chain_obstruction(self, spec: ProblemSpec, root: LimitVector, w: GridFunction) -> float:
        """|⟨h w_root, w_λ⟩| on (−1, 1), the solvability functional of (𝒜 − λ)U = root.

        The middle equation −w″ − λ h w = h w_root with w′(±1) = 0 is solvable only when
        this pairing vanishes; a nonzero value means no root vector of height three.
        """
        return float(abs(root.w.inner(w, spec.h)))

    def jordan_residual(self, spec: ProblemSpec, lam: float, root: LimitVector, target: LimitVector) -> float:
        """ℒ-size of (𝒜 − λ)root − target plus the trace and end-condition mismatches."""
        ca, sa = spec.left_form()
        cb, sb = spec.right_form()
        u, w, v = root.u, root.w, root.v
        eqs = (
            _ode_residual_norm(spec.q, spec.r, lam, u, np.real(target.u.value))
            + _ode_residual_norm(ZERO, spec.h, lam, w, np.real(target.w.value))
            + _ode_residual_norm(spec.q, spec.r, lam, v, np.real(target.v.value))
        )
        mismatch = (
            abs(u.value[-1] - w.value[0])
            + abs(v.value[0] - w.value[-1])
            + abs(w.deriv[0])
            + abs(w.deriv[-1])
            + abs(ca * u.value[0] + sa * u.deriv[0])
            + abs(cb * v.value[-1] + sb * v.deriv[-1])
        )
        scale = max(1.0, root.norm(spec.r, spec.h))
        return float((eqs + mismatch) / scale)

    def theta_factor(self, spec: ProblemSpec, lam: float, w: GridFunction) -> ThetaFactor:
        """θ = (‖T_a(λ)w‖² + ‖T_b(λ)w‖²)⁻¹."""
        ta, tb = self.boundary_pieces(spec, lam, w)
        na2, nb2 = ta.norm2(spec.r), tb.norm2(spec.r)
        total = na2 + nb2
        if not total > 0:
            raise DegenerateDataError("|T_a w|^2 + |T_b w|^2", total)
        theta = 1.0 / total
        return ThetaFactor(theta=theta, norm_a=float(np.sqrt(na2)), norm_b=float(np.sqrt(nb2)), limit_norm=float(theta * np.sqrt(total)))

    def attach_basis(self, spec: ProblemSpec, data: LimitEigendata) -> LimitEigendata:
        basis = list(self.eigenvector_basis(spec, data))
        if data.is_jordan:
            root = self.root_vector(spec, data).root
            basis.append(root)
        return replace(data, basis=tuple(basis))

    # resolvent

    def apply_limit_resolvent(self, spec: ProblemSpec, zeta: complex, F: LimitVector) -> LimitVector:
        """Block formula: middle resolvent first, then outer resolvents plus T-lifts of its traces."""
        zeta = complex(zeta)
        pa, pb, pab = self.problem_a(spec), self.problem_b(spec), self.problem_ab(spec)
        for problem in (pa, pb, pab):
            guard_spectrum(problem.chain(), zeta, self.settings)
        psi = solve_nonhomogeneous(pb, zeta, F.w, self.settings)
        ra = solve_nonhomogeneous(pa, zeta, F.u, self.settings)
        rb = solve_nonhomogeneous(pab, zeta, F.v, self.settings)
        ta, tb = self.boundary_pieces(spec, zeta, psi)
        result = LimitVector(ra + _complex(ta), psi, rb + _complex(tb), "resolvent")
        logger.debug("limit.resolvent", zeta=str(zeta))
        return result

    def resolvent_residuals(
        self, spec: ProblemSpec, zeta: complex, F: LimitVector, Y: LimitVector
    ) -> dict[str, float]:
        ca, sa = spec.left_form()
        cb, sb = spec.right_form()
        u, w, v = Y.u, Y.w, Y.v
        return {
            "eq_a": integrated_residual(spec.q, spec.r, zeta, u, np.asarray(F.u(u.x))),
            "eq_0": integrated_residual(ZERO, spec.h, zeta, w, np.asarray(F.w(w.x))),
            "eq_b": integrated_residual(spec.q, spec.r, zeta, v, np.asarray(F.v(v.x))),
            "neumann(-1)": abs(w.deriv[0]),
            "neumann(1)": abs(w.deriv[-1]),
            "trace(-1)": abs(u.value[-1] - w.value[0]),
            "trace(1)": abs(v.value[0] - w.value[-1]),
            "ell_a": abs(ca * u.value[0] + sa * u.deriv[0]),
            "ell_b": abs(cb * v.value[-1] + sb * v.deriv[-1]),
        }


def _real(gf: GridFunction) -> GridFunction:
    return GridFunction(gf.x, np.real(gf.value), np.real(gf.deriv), gf.label)


def _complex(gf: GridFunction) -> GridFunction:
    return GridFunction(gf.x, gf.value.astype(complex), gf.deriv.astype(complex), gf.label)


def _index_guess(problem: SLProblem, lam: float, settings: Settings) -> int:
    return count_below(problem, lam + settings.merge_tol * max(1.0, abs(lam)), settings)
