from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicHermiteSpline

from stringlab.core.errors import DomainError

_EDGE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Sampled function with derivative samples on a strictly increasing grid.

    Values may be real or complex. Evaluation between nodes uses cubic Hermite
    interpolation built from the stored derivatives.
    """

    x: np.ndarray
    value: np.ndarray
    deriv: np.ndarray
    label: str = ""
    _splines: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float)
        value = np.asarray(self.value)
        deriv = np.asarray(self.deriv)
        if x.ndim != 1 or x.size < 2:
            raise DomainError("grid function needs at least two nodes")
        if value.shape != x.shape or deriv.shape != x.shape:
            raise DomainError("value and derivative samples must match the grid")
        if np.any(np.diff(x) <= 0):
            raise DomainError("grid must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "deriv", deriv)

    @classmethod
    def zeros(cls, x: np.ndarray, label: str = "", dtype=float) -> "GridFunction":
        x = np.asarray(x, dtype=float)
        return cls(x, np.zeros(x.shape, dtype=dtype), np.zeros(x.shape, dtype=dtype), label)

    @property
    def lo(self) -> float:
        return float(self.x[0])

    @property
    def hi(self) -> float:
        return float(self.x[-1])

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.value) or np.iscomplexobj(self.deriv)

    def _spline(self, part: str) -> CubicHermiteSpline:
        spline = self._splines.get(part)
        if spline is None:
            take = np.real if part == "re" else np.imag
            spline = CubicHermiteSpline(self.x, take(self.value), take(self.deriv))
            self._splines[part] = spline
        return spline

    def _check(self, t) -> None:
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < self.lo - _EDGE_TOL) or np.any(t_arr > self.hi + _EDGE_TOL):
            raise DomainError(f"evaluation point outside [{self.lo}, {self.hi}]")

    def __call__(self, t):
        self._check(t)
        t = np.clip(t, self.lo, self.hi)
        out = self._spline("re")(t)
        if self.is_complex:
            out = out + 1j * self._spline("im")(t)
        return out if np.ndim(out) else out.item()

    def derivative(self, t):
        self._check(t)
        t = np.clip(t, self.lo, self.hi)
        out = self._spline("re")(t, 1)
        if self.is_complex:
            out = out + 1j * self._spline("im")(t, 1)
        return out if np.ndim(out) else out.item()

    def scaled(self, factor: complex | float) -> "GridFunction":
        return GridFunction(self.x, self.value * factor, self.deriv * factor, self.label)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        if not np.array_equal(self.x, other.x):
            raise DomainError("grid functions live on different grids")
        return GridFunction(self.x, self.value + other.value, self.deriv + other.deriv, self.label)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        return self + other.scaled(-1.0)

    def resample(self, x: np.ndarray) -> "GridFunction":
        x = np.asarray(x, dtype=float)
        return GridFunction(x, np.asarray(self(x)), np.asarray(self.derivative(x)), self.label)

    def inner(self, other: "GridFunction", weight=None) -> complex | float:
        """∫ weight · self · conj(other) by Simpson's rule on the shared grid."""
        if not np.array_equal(self.x, other.x):
            other = other.resample(self.x)
        w = 1.0 if weight is None else np.asarray(weight(self.x))
        out = simpson(w * self.value * np.conj(other.value), x=self.x)
        return out if np.iscomplexobj(out) else float(out)

    def norm2(self, weight=None) -> float:
        w = 1.0 if weight is None else np.asarray(weight(self.x))
        return float(simpson(w * np.abs(self.value) ** 2, x=self.x))

    def norm(self, weight=None) -> float:
        return float(np.sqrt(max(self.norm2(weight), 0.0)))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.value)))

    def rows(self) -> Iterator[tuple[float, float, float, float, float]]:
        value = self.value.astype(complex)
        deriv = self.deriv.astype(complex)
        for xi, v, d in zip(self.x, value, deriv):
            yield float(xi), float(v.real), float(v.imag), float(d.real), float(d.imag)


@dataclass(frozen=True)
class LimitVector:
    """Element of ℒ = L₂(r,(a,0)) × L₂(h,(−1,1)) × L₂(r,(0,b))."""

    u: GridFunction
    w: GridFunction
    v: GridFunction
    tag: str = "eigenvector"

    def pieces(self) -> tuple[tuple[str, GridFunction], ...]:
        return (("a", self.u), ("0", self.w), ("b", self.v))

    def scaled(self, factor: complex | float) -> "LimitVector":
        return LimitVector(self.u.scaled(factor), self.w.scaled(factor), self.v.scaled(factor), self.tag)

    def __add__(self, other: "LimitVector") -> "LimitVector":
        return LimitVector(self.u + other.u, self.w + other.w, self.v + other.v, self.tag)

    def __sub__(self, other: "LimitVector") -> "LimitVector":
        return self + other.scaled(-1.0)

    def inner(self, other: "LimitVector", r, h) -> complex | float:
        return self.u.inner(other.u, r) + self.w.inner(other.w, h) + self.v.inner(other.v, r)

    def norm(self, r, h) -> float:
        total = self.u.norm2(r) + self.w.norm2(h) + self.v.norm2(r)
        return float(np.sqrt(max(total, 0.0)))

    @property
    def traces(self) -> dict[str, complex | float]:
        return {
            "u(0)": self.u.value[-1],
            "w(-1)": self.w.value[0],
            "w(1)": self.w.value[-1],
            "v(0)": self.v.value[0],
        }
