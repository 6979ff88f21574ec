from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from stringlab.models.coeffs import ProblemSpec
from stringlab.models.grid import GridFunction


@dataclass(frozen=True)
class TransferMatrix:
    """Map of (y, y') across one piece of the chain in physical coordinates."""

    label: str
    matrix: np.ndarray

    @property
    def det(self) -> complex:
        return complex(np.linalg.det(self.matrix))


@dataclass(frozen=True)
class PerturbedEigenpair:
    """Eigenpair of the ε-problem in the three-piece form.

    ``outer_left`` and ``outer_right`` are sampled in x with physical
    derivatives, ``inner`` is w_ε(t) = y_ε(εt) on (−1, 1) with d/dt derivatives.
    """

    index: int
    eps: float
    lambda_eps: float
    outer_left: GridFunction
    inner: GridFunction
    outer_right: GridFunction

    def coupling_residuals(self) -> dict[str, float]:
        eps = self.eps
        ol, w, orr = self.outer_left, self.inner, self.outer_right
        return {
            "value(-eps)": abs(ol.value[-1] - w.value[0]),
            "value(+eps)": abs(orr.value[0] - w.value[-1]),
            "deriv(-eps)": abs(eps * ol.deriv[-1] - w.deriv[0]),
            "deriv(+eps)": abs(eps * orr.deriv[0] - w.deriv[-1]),
        }

    @property
    def max_coupling_residual(self) -> float:
        return max(self.coupling_residuals().values())

    def composite_norm(self, spec: ProblemSpec) -> float:
        """√(‖outer_left‖²_r + ε‖inner‖²_h + ‖outer_right‖²_r)."""
        total = (
            self.outer_left.norm2(spec.r)
            + self.eps * self.inner.norm2(spec.h)
            + self.outer_right.norm2(spec.r)
        )
        return float(np.sqrt(total))

    def mass_norm(self, spec: ProblemSpec) -> float:
        """True L₂(r_ε, (a, b)) norm; the inner term carries ε⁻¹."""
        total = (
            self.outer_left.norm2(spec.r)
            + self.inner.norm2(spec.h) / self.eps
            + self.outer_right.norm2(spec.r)
        )
        return float(np.sqrt(total))

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Assembled eigenfunction y_ε at physical points, inner piece mapped back to (−ε, ε)."""
        x = np.asarray(x, dtype=float)
        eps = self.eps
        out = np.empty(x.shape)
        left = x <= -eps
        right = x >= eps
        mid = ~(left | right)
        if left.any():
            out[left] = self.outer_left(x[left])
        if right.any():
            out[right] = self.outer_right(x[right])
        if mid.any():
            out[mid] = self.inner(x[mid] / eps)
        return out

    def pieces(self) -> tuple[tuple[str, GridFunction], ...]:
        return (("outer_left", self.outer_left), ("inner", self.inner), ("outer_right", self.outer_right))
