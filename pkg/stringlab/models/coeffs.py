from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from numpy.polynomial import polynomial as npoly

from stringlab.core.config import Settings, settings as default_settings
from stringlab.core.errors import DomainError
from stringlab.engine.quadrature import composite_gauss
from stringlab.schemas.report import ValidationReport

_EDGE_TOL = 1e-12


class CoefficientFunction(ABC):
    """A real coefficient evaluated lazily on scalars or numpy arrays.

    Scalar input returns a Python float so that ODE right-hand sides stay cheap.
    """

    kind: str = "abstract"

    @abstractmethod
    def __call__(self, x): ...

    @property
    def domain(self) -> tuple[float, float] | None:
        return None

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Points where the coefficient (or a derivative) may jump."""
        return ()

    def restrict(self, lo: float, hi: float) -> "Restricted":
        return Restricted(self, lo, hi)

    def pullback(self, scale: float, shift: float = 0.0, factor: float = 1.0) -> "AffinePullback":
        """Return t -> factor * self(scale * t + shift)."""
        return AffinePullback(self, scale, shift, factor)

    def sample(self, lo: float, hi: float, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Sample on a uniform grid plus every breakpoint inside [lo, hi]."""
        xs = np.linspace(lo, hi, n)
        extra = [p for p in self.breakpoints if lo <= p <= hi]
        if extra:
            xs = np.unique(np.concatenate([xs, np.asarray(extra, dtype=float)]))
        return xs, np.asarray(self(xs), dtype=float)


@dataclass(frozen=True)
class ConstantCoefficient(CoefficientFunction):
    value: float
    kind: str = field(default="constant", init=False)

    def __call__(self, x):
        if isinstance(x, np.ndarray):
            return np.full(x.shape, self.value, dtype=float)
        return self.value


@dataclass(frozen=True)
class PolynomialPiece:
    lo: float
    hi: float
    coefficients: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.hi > self.lo:
            raise DomainError(f"empty piece [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class PiecewisePolynomial(CoefficientFunction):
    """Polynomials in ascending powers of the global coordinate, one per piece."""

    pieces: tuple[PolynomialPiece, ...]
    kind: str = field(default="piecewise-polynomial", init=False)

    def __post_init__(self) -> None:
        if not self.pieces:
            raise DomainError("piecewise polynomial needs at least one piece")
        ordered = tuple(sorted(self.pieces, key=lambda p: p.lo))
        object.__setattr__(self, "pieces", ordered)

    @property
    def domain(self) -> tuple[float, float]:
        return self.pieces[0].lo, self.pieces[-1].hi

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(sorted({p.lo for p in self.pieces} | {p.hi for p in self.pieces}))

    def _piece_for(self, x: float) -> PolynomialPiece | None:
        for piece in self.pieces:
            if piece.lo - _EDGE_TOL <= x <= piece.hi + _EDGE_TOL:
                return piece
        return None

    def __call__(self, x):
        if isinstance(x, np.ndarray):
            out = np.full(x.shape, np.nan, dtype=float)
            # later pieces win on shared endpoints, matching the scalar path's first hit
            for piece in reversed(self.pieces):
                mask = (x >= piece.lo - _EDGE_TOL) & (x <= piece.hi + _EDGE_TOL)
                if mask.any():
                    out[mask] = npoly.polyval(x[mask], piece.coefficients)
            return out
        piece = self._piece_for(x)
        if piece is None:
            return math.nan
        value = 0.0
        for c in reversed(piece.coefficients):
            value = value * x + c
        return value


@dataclass(frozen=True)
class GridSampled(CoefficientFunction):
    """Linear interpolation through (x, value) samples."""

    xs: tuple[float, ...]
    values: tuple[float, ...]
    kind: str = field(default="grid-sampled", init=False)

    def __post_init__(self) -> None:
        if len(self.xs) != len(self.values) or len(self.xs) < 2:
            raise DomainError("grid-sampled coefficient needs at least two matching samples")
        if any(b <= a for a, b in zip(self.xs, self.xs[1:])):
            raise DomainError("grid-sampled abscissae must be strictly increasing")

    @property
    def domain(self) -> tuple[float, float]:
        return self.xs[0], self.xs[-1]

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(self.xs)

    def __call__(self, x):
        lo, hi = self.domain
        if isinstance(x, np.ndarray):
            out = np.interp(x, self.xs, self.values)
            outside = (x < lo - _EDGE_TOL) | (x > hi + _EDGE_TOL)
            if outside.any():
                out = np.where(outside, np.nan, out)
            return out
        if x < lo - _EDGE_TOL or x > hi + _EDGE_TOL:
            return math.nan
        return float(np.interp(x, self.xs, self.values))


@dataclass(frozen=True)
class AffinePullback(CoefficientFunction):
    base: CoefficientFunction
    scale: float
    shift: float = 0.0
    factor: float = 1.0
    kind: str = field(default="pullback", init=False)

    def __call__(self, x):
        return self.factor * self.base(self.scale * x + self.shift)

    @property
    def domain(self) -> tuple[float, float] | None:
        dom = self.base.domain
        if dom is None:
            return None
        ends = sorted(((dom[0] - self.shift) / self.scale, (dom[1] - self.shift) / self.scale))
        return ends[0], ends[1]

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(sorted((p - self.shift) / self.scale for p in self.base.breakpoints))


@dataclass(frozen=True)
class Restricted(CoefficientFunction):
    base: CoefficientFunction
    lo: float
    hi: float
    kind: str = field(default="restricted", init=False)

    def __call__(self, x):
        return self.base(x)

    @property
    def domain(self) -> tuple[float, float]:
        return self.lo, self.hi

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(p for p in self.base.breakpoints if self.lo < p < self.hi)


def constant(value: float) -> ConstantCoefficient:
    return ConstantCoefficient(float(value))


def piecewise(pieces: Iterable[tuple[float, float, Iterable[float]]]) -> PiecewisePolynomial:
    return PiecewisePolynomial(
        tuple(PolynomialPiece(float(lo), float(hi), tuple(float(c) for c in cs)) for lo, hi, cs in pieces)
    )


def polynomial(lo: float, hi: float, coefficients: Iterable[float]) -> PiecewisePolynomial:
    return piecewise([(lo, hi, coefficients)])


@dataclass(frozen=True)
class ProblemSpec:
    """Full input of the perturbed problem: interval, Robin angles, q, r and h."""

    a: float
    b: float
    alpha: float
    beta: float
    q: CoefficientFunction
    r: CoefficientFunction
    h: CoefficientFunction
    name: str = "unnamed"

    @property
    def max_eps(self) -> float:
        return min(-self.a, self.b)

    def left_form(self) -> tuple[float, float]:
        """(cos α, sin α) of ℓ_a y = y(a) cos α + y'(a) sin α."""
        return math.cos(self.alpha), math.sin(self.alpha)

    def right_form(self) -> tuple[float, float]:
        return math.cos(self.beta), math.sin(self.beta)

    @property
    def is_free_string(self) -> bool:
        """Neumann at both ends and q ≡ 0, so constants are eigenfunctions with λ = 0 for every ε."""
        neumann = abs(math.cos(self.alpha)) < 1e-12 and abs(math.cos(self.beta)) < 1e-12
        return neumann and isinstance(self.q, ConstantCoefficient) and self.q.value == 0.0


@dataclass(frozen=True)
class EpsWeight:
    """The singularly perturbed weight r_ε."""

    spec: ProblemSpec
    eps: float

    def __post_init__(self) -> None:
        if not 0.0 < self.eps < self.spec.max_eps:
            raise DomainError(
                f"eps={self.eps} must lie in (0, {self.spec.max_eps}) for interval "
                f"({self.spec.a}, {self.spec.b})"
            )

    def __call__(self, x):
        spec, eps = self.spec, self.eps
        if isinstance(x, np.ndarray):
            if np.any((x <= spec.a) | (x >= spec.b)):
                raise DomainError(f"points outside ({spec.a}, {spec.b})")
            inner = np.abs(x) < eps
            out = np.asarray(spec.r(x), dtype=float).copy()
            if inner.any():
                out[inner] = np.asarray(spec.h(x[inner] / eps), dtype=float) / eps**2
            return out
        if not spec.a < x < spec.b:
            raise DomainError(f"x={x} outside ({spec.a}, {spec.b})")
        # junction points x = ±ε follow the outer branch
        if abs(x) < eps:
            return spec.h(x / eps) / eps**2
        return spec.r(x)

    def inner_mass(self, nodes: int = 64) -> float:
        """∫_{-ε}^{ε} r_ε dx computed in the rescaled variable (equals ε⁻¹ ∫ h)."""
        t, w = composite_gauss(-1.0, 1.0, nodes, self.spec.h.breakpoints)
        return float(np.sum(w * np.asarray(self.spec.h(t)))) / self.eps


def eval_weight_eps(w: EpsWeight, x: float) -> float:
    """r_ε(x) for a < x < b; junction points follow the outer branch."""
    return w(x)


def _coverage_issue(name: str, coeff: CoefficientFunction, lo: float, hi: float) -> str | None:
    dom = coeff.domain
    if dom is None:
        return None
    if dom[0] > lo + _EDGE_TOL or dom[1] < hi - _EDGE_TOL:
        return f"{name} is declared on [{dom[0]}, {dom[1]}] but must cover [{lo}, {hi}]"
    return None


def _check_coefficient(
    report: ValidationReport,
    name: str,
    coeff: CoefficientFunction,
    lo: float,
    hi: float,
    samples: int,
    floor: float | None,
) -> None:
    issue = _coverage_issue(name, coeff, lo, hi)
    if issue:
        report.add("coverage", issue)
        return
    xs, values = coeff.sample(lo, hi, samples)
    if not np.all(np.isfinite(values)):
        bad = float(xs[np.argmax(~np.isfinite(values))])
        report.add("finite", f"{name} is not finite at x={bad:.6g}")
        return
    if floor is not None:
        low = float(np.min(values))
        if low < floor:
            where = float(xs[np.argmin(values)])
            report.add("positivity", f"weight {name} not positive: min {low:.6g} at x={where:.6g}")


def validate_spec(spec: ProblemSpec, settings: Settings | None = None) -> ValidationReport:
    """Check every admissibility condition of ``spec`` and report all violations."""
    settings = settings or default_settings
    report = ValidationReport(name=spec.name)
    if not (math.isfinite(spec.a) and math.isfinite(spec.b)):
        report.add("interval", "interval endpoints must be finite")
        return report
    if not spec.a < 0.0 < spec.b:
        report.add("interval", f"origin not interior: need a < 0 < b, got a={spec.a}, b={spec.b}")
    for angle, label in ((spec.alpha, "alpha"), (spec.beta, "beta")):
        if not math.isfinite(angle):
            report.add("angle", f"{label} must be finite")
    if spec.a < spec.b:
        n = settings.validation_samples
        _check_coefficient(report, "q", spec.q, spec.a, spec.b, n, None)
        _check_coefficient(report, "r", spec.r, spec.a, spec.b, n, settings.positivity_floor)
    _check_coefficient(report, "h", spec.h, -1.0, 1.0, settings.validation_samples, settings.positivity_floor)
    return report
