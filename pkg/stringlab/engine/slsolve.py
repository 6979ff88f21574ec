from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Union

import numpy as np
from scipy.integrate import cumulative_simpson

from stringlab.core.config import Settings, settings as default_settings
from stringlab.core.errors import DomainError, NearSingularError, NumericalFailure
from stringlab.core.log import get_logger
from stringlab.engine.shooting import (
    Chain,
    ChainSolution,
    OdeOptions,
    Segment,
    count_below as chain_count_below,
    eigenfunction_samples,
    locate_eigenvalues,
    right_form_value,
    shoot,
)
from stringlab.models.coeffs import CoefficientFunction
from stringlab.models.grid import GridFunction

logger = get_logger(__name__)

_UNIT_TOL = 1e-12


@dataclass(frozen=True)
class Robin:
    """Endpoint condition y·cos θ + y'·sin θ = 0, stored as (cos θ, sin θ)."""

    cos: float
    sin: float

    def __post_init__(self) -> None:
        if abs(self.cos**2 + self.sin**2 - 1.0) > _UNIT_TOL:
            raise DomainError(f"Robin form ({self.cos}, {self.sin}) is not normalized")

    @classmethod
    def from_angle(cls, theta: float) -> "Robin":
        c, s = math.cos(theta), math.sin(theta)
        # exact zeros for the Dirichlet and Neumann angles
        if abs(c) < 1e-15:
            c = 0.0
        if abs(s) < 1e-15:
            s = 0.0
        return cls(c, s)

    @property
    def form(self) -> tuple[float, float]:
        return self.cos, self.sin


DIRICHLET = Robin(1.0, 0.0)
NEUMANN = Robin(0.0, 1.0)


@dataclass(frozen=True)
class DirichletValue:
    """Prescribed trace y(end) = value."""

    value: complex = 0.0

    @property
    def form(self) -> tuple[float, float]:
        return 1.0, 0.0


BoundaryCondition = Union[Robin, DirichletValue]


@dataclass(frozen=True)
class SLProblem:
    """−y'' + q y = λ w y on (left, right) with one condition at each end."""

    left: float
    right: float
    q: CoefficientFunction
    weight: CoefficientFunction
    left_bc: BoundaryCondition = DIRICHLET
    right_bc: BoundaryCondition = DIRICHLET
    label: str = ""

    def __post_init__(self) -> None:
        if not self.right > self.left:
            raise DomainError(f"empty interval ({self.left}, {self.right})")

    @property
    def segment(self) -> Segment:
        return Segment(self.left, self.right, self.q, self.weight, label=self.label)

    def chain(self) -> Chain:
        return Chain((self.segment,), self.left_bc.form, self.right_bc.form)

    def homogeneous(self) -> "SLProblem":
        """Same problem with every prescribed trace replaced by a zero Dirichlet condition."""
        left = DIRICHLET if isinstance(self.left_bc, DirichletValue) else self.left_bc
        right = DIRICHLET if isinstance(self.right_bc, DirichletValue) else self.right_bc
        return replace(self, left_bc=left, right_bc=right)

    def grid(self, settings: Settings) -> np.ndarray:
        return self.segment.grid(settings.grid_points)


@dataclass(frozen=True)
class Eigenpair:
    index: int
    lam: float
    efun: GridFunction


@dataclass(frozen=True)
class BoundarySolution:
    zeta: complex
    trace: complex
    sol: GridFunction


def _settings(settings: Settings | None) -> Settings:
    return settings or default_settings


def eigenvalues(p: SLProblem, n_max: int, settings: Settings | None = None) -> list[Eigenpair]:
    """First ``n_max`` eigenpairs, strictly increasing, 0-based oscillation index."""
    settings = _settings(settings)
    if n_max < 1:
        raise DomainError("n_max must be at least 1")
    chain = p.homogeneous().chain()
    lams = locate_eigenvalues(chain, n_max, settings)
    pairs = []
    for n, lam in enumerate(lams):
        (piece,) = eigenfunction_samples(chain, lam, settings)
        pairs.append(Eigenpair(n, lam, GridFunction(piece.t, piece.y, piece.d, label=p.label)))
    logger.debug("slsolve.eigenvalues", label=p.label, n_max=n_max, lams=lams)
    return pairs


def count_below(p: SLProblem, lam: float, settings: Settings | None = None) -> int:
    """Number of eigenvalues of the homogeneous problem strictly below ``lam``."""
    settings = _settings(settings)
    return chain_count_below(p.homogeneous().chain(), lam, OdeOptions.from_settings(settings))


def match_eigenvalue(p: SLProblem, lam: float, settings: Settings) -> tuple[int, float]:
    """Index and located value of the eigenvalue within matching tolerance of ``lam``."""
    chain = p.homogeneous().chain()
    opts = OdeOptions.from_settings(settings)
    tol = settings.eigen_match_tol * max(1.0, abs(lam))
    below = chain_count_below(chain, lam - tol, opts)
    above = chain_count_below(chain, lam + tol, opts)
    if above == below:
        raise DomainError(f"λ={lam} is not an eigenvalue of {p.label or 'the problem'}")
    exact = locate_eigenvalues(chain, below + 1, settings)[-1]
    return below, exact


def eigenfunction_at(
    p: SLProblem, lam: float, x: float, settings: Settings | None = None
) -> tuple[float, float]:
    """Normalized eigenfunction value and derivative at ``x``."""
    settings = _settings(settings)
    if not p.left <= x <= p.right:
        raise DomainError(f"x={x} outside [{p.left}, {p.right}]")
    _, exact = match_eigenvalue(p, lam, settings)
    (piece,) = eigenfunction_samples(p.homogeneous().chain(), exact, settings)
    efun = GridFunction(piece.t, piece.y, piece.d)
    return float(efun(x)), float(efun.derivative(x))


def guard_spectrum(chain: Chain, zeta: complex, settings: Settings) -> None:
    """Raise NearSingularError when ζ lies within the spectral guard of an eigenvalue."""
    zeta = complex(zeta)
    guard = settings.spectral_guard * max(1.0, abs(zeta.real))
    if abs(zeta.imag) > guard:
        return
    opts = OdeOptions.from_settings(settings)
    below = chain_count_below(chain, zeta.real - guard, opts)
    above = chain_count_below(chain, zeta.real + guard, opts)
    if above > below:
        eigenvalue = locate_eigenvalues(chain, below + 1, settings)[-1]
        raise NearSingularError(
            f"ζ={zeta} lies within {guard:.1e} of the eigenvalue {eigenvalue!r}",
            zeta=zeta,
            eigenvalue=eigenvalue,
        )


def _as_zeta(zeta: complex) -> complex | float:
    z = complex(zeta)
    return z if z.imag != 0.0 else z.real


def sample_solution(solution: ChainSolution, k: int, t: np.ndarray, label: str = "") -> GridFunction:
    y, d = solution.physical_state(k, t)
    return GridFunction(t, y, d, label=label)


def integrated_residual(
    q: CoefficientFunction,
    weight: CoefficientFunction,
    zeta: complex,
    gf: GridFunction,
    forcing: np.ndarray | None = None,
) -> float:
    """Relative residual of y' = d, d' = (q − ζw) y − w f in integrated form on gf's grid."""
    x = gf.x
    y, d = gf.value, gf.deriv
    w = np.asarray(weight(x))
    dd = (np.asarray(q(x)) - zeta * w) * y
    if forcing is not None:
        dd = dd - w * forcing
    r1 = y - y[0] - cumulative_simpson(d, x=x, initial=0.0)
    r2 = d - d[0] - cumulative_simpson(dd, x=x, initial=0.0)
    scale = max(np.max(np.abs(y)), np.max(np.abs(d)), 1e-300)
    return float(max(np.max(np.abs(r1)), np.max(np.abs(r2))) / scale)


def solve_boundary(
    p: SLProblem, zeta: complex, trace: complex | None = None, settings: Settings | None = None
) -> BoundarySolution:
    """Solution of −y'' + q y − ζ w y = 0 with a homogeneous Robin end and a prescribed trace."""
    settings = _settings(settings)
    left_trace = isinstance(p.left_bc, DirichletValue)
    right_trace = isinstance(p.right_bc, DirichletValue)
    if left_trace == right_trace:
        raise DomainError("solve_boundary needs exactly one trace end and one Robin end")
    bc = p.left_bc if left_trace else p.right_bc
    trace = bc.value if trace is None else trace
    zeta = _as_zeta(zeta)
    guard_spectrum(p.homogeneous().chain(), zeta, settings)

    chain = p.chain()
    opts = OdeOptions.from_settings(settings)
    if right_trace:
        base = shoot(chain, zeta, chain.left_vector, opts, "forward")
        end, _ = base.end_state("right")
    else:
        base = shoot(chain, zeta, chain.right_vector, opts, "backward")
        end, _ = base.end_state("left")
    if abs(end) == 0.0:
        raise NearSingularError("boundary solution vanishes at the trace end", zeta=zeta)
    t = p.grid(settings)
    sol = sample_solution(base, 0, t, p.label).scaled(trace / end)
    resid = integrated_residual(p.q, p.weight, zeta, sol)
    if sol.max_abs() > 0 and resid > settings.resid_tol:
        raise NumericalFailure(f"boundary solution residual {resid:.2e} exceeds tolerance")
    return BoundarySolution(complex(zeta), trace, sol)


def solve_nonhomogeneous(
    p: SLProblem, zeta: complex, f: GridFunction, settings: Settings | None = None
) -> GridFunction:
    """Solve −y'' + q y − ζ w y = w f with homogeneous conditions at both ends."""
    settings = _settings(settings)
    zeta = _as_zeta(zeta)
    hom = p.homogeneous()
    chain = hom.chain()
    guard_spectrum(chain, zeta, settings)
    opts = OdeOptions.from_settings(settings)
    t = p.grid(settings)
    if not np.any(f.value):
        return GridFunction.zeros(t, label=p.label, dtype=complex)

    particular = shoot(chain, zeta, (0.0, 0.0), opts, "forward", forcing=[f])
    homog = shoot(chain, zeta, chain.left_vector, opts, "forward")
    lp, lh = right_form_value(particular), right_form_value(homog)
    if lh == 0:
        raise NearSingularError("homogeneous solution satisfies both conditions", zeta=zeta)
    full = particular.plus(homog, -lp / lh)
    sol = sample_solution(full, 0, t, p.label)
    resid = integrated_residual(p.q, p.weight, zeta, sol, np.asarray(f(t)))
    if resid > settings.resid_tol:
        raise NumericalFailure(f"nonhomogeneous solve residual {resid:.2e} exceeds tolerance")
    return sol
