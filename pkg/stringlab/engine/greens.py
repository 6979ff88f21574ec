"""Dense Green-kernel matrices of both resolvents on a shared discretization of ℒ.

ℒ = L₂(r,(a,0)) × L₂(h,(−1,1)) × L₂(r,(0,b)) is sampled at composite
Gauss–Legendre nodes. A kernel matrix K acts as (KF)_i = Σ_j K_ij F_j μ_j ω_j,
with μ the weight of the piece (r or h) and ω the quadrature weight, so the
operator norm in ℒ is the spectral norm of D^{1/2} K D^{1/2}, D = diag(μω).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.linalg import svdvals
from scipy.sparse.linalg import ArpackNoConvergence, svds

from stringlab.core.errors import NearSingularError
from stringlab.core.log import get_logger
from stringlab.engine.quadrature import composite_gauss
from stringlab.engine.shooting import Chain, ChainSolution, OdeOptions, Segment, integrate_segment, shoot
from stringlab.engine.slsolve import SLProblem
from stringlab.models.coeffs import CoefficientFunction, ProblemSpec

logger = get_logger(__name__)

PIECES = ("a", "0", "b")


@dataclass(frozen=True)
class SpaceDiscretization:
    """Quadrature nodes, weights and piece weights of ℒ, split at ±ε and coefficient breakpoints."""

    eps: float
    nodes: tuple[np.ndarray, np.ndarray, np.ndarray]
    weights: tuple[np.ndarray, np.ndarray, np.ndarray]
    measure: tuple[np.ndarray, np.ndarray, np.ndarray]

    @property
    def sizes(self) -> tuple[int, int, int]:
        return tuple(len(x) for x in self.nodes)

    @property
    def size(self) -> int:
        return sum(self.sizes)

    def slices(self) -> dict[str, slice]:
        na, n0, _ = self.sizes
        return {"a": slice(0, na), "0": slice(na, na + n0), "b": slice(na + n0, self.size)}

    @property
    def sqrt_mass(self) -> np.ndarray:
        return np.sqrt(np.concatenate([m * w for m, w in zip(self.measure, self.weights)]))

    def sample(self, fa, f0, fb) -> np.ndarray:
        """Stack the values of three callables at the nodes of their pieces."""
        xa, x0, xb = self.nodes
        return np.concatenate([np.asarray(fa(xa)), np.asarray(f0(x0)), np.asarray(fb(xb))]).astype(complex)

    def weighted(self, kernel: np.ndarray) -> np.ndarray:
        d = self.sqrt_mass
        return d[:, None] * kernel * d[None, :]


def _cuts(*coefficients: CoefficientFunction, scale: float = 1.0) -> list[float]:
    return [p / scale for c in coefficients for p in c.breakpoints]


def discretize_space(
    spec: ProblemSpec, eps: float, nodes: int, min_panel_nodes: int = 8
) -> SpaceDiscretization:
    """``nodes`` Gauss points per piece of ℒ, shared by the perturbed and the limit kernels."""
    xa, wa = composite_gauss(spec.a, 0.0, nodes, [-eps, *_cuts(spec.q, spec.r)], min_panel_nodes)
    x0, w0 = composite_gauss(
        -1.0, 1.0, nodes, [*_cuts(spec.h), *_cuts(spec.q, scale=eps)], min_panel_nodes
    )
    xb, wb = composite_gauss(0.0, spec.b, nodes, [eps, *_cuts(spec.q, spec.r)], min_panel_nodes)
    measure = (np.asarray(spec.r(xa), float), np.asarray(spec.h(x0), float), np.asarray(spec.r(xb), float))
    return SpaceDiscretization(eps, (xa, x0, xb), (wa, w0, wb), measure)


class GreenKernel:
    """G(x, s) = −y_L(min(x, s)) y_R(max(x, s)) / W for −y'' + (Q − ζW)y on a chain.

    y_L satisfies the left end condition, y_R the right one and
    W = y_L y_R' − y_L' y_R, all in physical variables.
    """

    def __init__(self, chain: Chain, zeta: complex, opts: OdeOptions):
        self.chain = chain
        self.zeta = complex(zeta)
        self.left = shoot(chain, self.zeta, chain.left_vector, opts, "forward")
        self.right = shoot(chain, self.zeta, chain.right_vector, opts, "backward")
        yl, dyl = self.left.end_state("left")
        yr, dyr = self.right.end_state("left")
        self.wronskian = complex(yl * dyr - dyl * yr)
        if self.wronskian == 0:
            raise NearSingularError("Green kernel has a vanishing Wronskian", zeta=self.zeta)

    def _state(self, solution: ChainSolution, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        y = np.zeros(x.shape, dtype=complex)
        d = np.zeros(x.shape, dtype=complex)
        done = np.zeros(x.shape, dtype=bool)
        for k, seg in enumerate(self.chain.segments):
            lo, hi = seg.physical(seg.left), seg.physical(seg.right)
            mask = (x >= lo) & (x <= hi) & ~done
            if mask.any():
                yk, dk = solution.physical_state(k, x[mask] / seg.scale)
                y[mask], d[mask] = yk, dk
                done |= mask
        return y, d

    def left_state(self, x) -> tuple[np.ndarray, np.ndarray]:
        return self._state(self.left, x)

    def right_state(self, x) -> tuple[np.ndarray, np.ndarray]:
        return self._state(self.right, x)

    def matrix(self, x: np.ndarray, s: np.ndarray) -> np.ndarray:
        yl_x, _ = self.left_state(x)
        yr_x, _ = self.right_state(x)
        yl_s, _ = self.left_state(s)
        yr_s, _ = self.right_state(s)
        below = np.asarray(x)[:, None] <= np.asarray(s)[None, :]
        prod = np.where(below, yl_x[:, None] * yr_s[None, :], yl_s[None, :] * yr_x[:, None])
        return -prod / self.wronskian

    def derivative_matrix(self, x: np.ndarray, s: np.ndarray) -> np.ndarray:
        """∂G/∂x; rows at x, columns at s with s ≠ x."""
        _, dyl_x = self.left_state(x)
        _, dyr_x = self.right_state(x)
        yl_s, _ = self.left_state(s)
        yr_s, _ = self.right_state(s)
        below = np.asarray(x)[:, None] < np.asarray(s)[None, :]
        prod = np.where(below, dyl_x[:, None] * yr_s[None, :], yl_s[None, :] * dyr_x[:, None])
        return -prod / self.wronskian


def limit_resolvent_matrix(
    problems: tuple[SLProblem, SLProblem, SLProblem],
    disc: SpaceDiscretization,
    zeta: complex,
    opts: OdeOptions,
) -> np.ndarray:
    """Block kernel of (𝒜 − ζ)⁻¹: outer Green kernels plus the lifts of the middle traces."""
    pa, pb, pab = (p.homogeneous() for p in problems)
    ga = GreenKernel(pa.chain(), zeta, opts)
    g0 = GreenKernel(pb.chain(), zeta, opts)
    gb = GreenKernel(pab.chain(), zeta, opts)
    xa, x0, xb = disc.nodes
    sl = disc.slices()

    lift_a, _ = ga.left_state(xa)
    end_a, _ = ga.left_state(np.array([0.0]))
    lift_b, _ = gb.right_state(xb)
    end_b, _ = gb.right_state(np.array([0.0]))
    if end_a[0] == 0 or end_b[0] == 0:
        raise NearSingularError("ζ is an eigenvalue of an outer problem", zeta=complex(zeta))

    kernel = np.zeros((disc.size, disc.size), dtype=complex)
    kernel[sl["a"], sl["a"]] = ga.matrix(xa, xa)
    kernel[sl["0"], sl["0"]] = g0.matrix(x0, x0)
    kernel[sl["b"], sl["b"]] = gb.matrix(xb, xb)
    kernel[sl["a"], sl["0"]] = (lift_a / end_a[0])[:, None] * g0.matrix(np.array([-1.0]), x0)
    kernel[sl["b"], sl["0"]] = (lift_b / end_b[0])[:, None] * g0.matrix(np.array([1.0]), x0)
    return kernel


def _fundamental_pair(
    q: CoefficientFunction, r: CoefficientFunction, zeta: complex, base: float, x: np.ndarray, opts: OdeOptions
) -> tuple[np.ndarray, np.ndarray]:
    """Solutions c1, c2 of the outer equation with (1, 0) and (0, 1) data at ``base``, sampled at x."""
    lo, hi = (base, 0.0) if base < 0 else (0.0, base)
    seg = Segment(lo, hi, q, r)
    c1 = integrate_segment(seg, zeta, base, (1.0 + 0j, 0j), 0.0, opts).at(x)[0]
    c2 = integrate_segment(seg, zeta, base, (0j, 1.0 + 0j), 0.0, opts).at(x)[0]
    return c1, c2


def perturbed_resolvent_matrix(
    chain: Chain,
    spec: ProblemSpec,
    disc: SpaceDiscretization,
    zeta: complex,
    opts: OdeOptions,
) -> np.ndarray:
    """Kernel of (𝒜_ε − ζ)⁻¹ in the coordinates of ℒ.

    On (−ε, 0) and (0, ε) the outer components are continued as Cauchy
    solutions of the outer equation forced by f_a and f_b.
    """
    eps = disc.eps
    kernel_eps = GreenKernel(chain, zeta, opts)
    xa, x0, xb = disc.nodes
    sl = disc.slices()

    cols = np.concatenate([xa, eps * x0, xb])
    active = np.concatenate([xa < -eps, np.ones(x0.shape, bool), xb > eps])
    factor = np.concatenate([np.ones(xa.shape), np.full(x0.shape, 1.0 / eps), np.ones(xb.shape)])
    col_weight = np.where(active, factor, 0.0)

    def rows(x: np.ndarray) -> np.ndarray:
        return kernel_eps.matrix(x, cols) * col_weight[None, :]

    def drows(x: np.ndarray) -> np.ndarray:
        return kernel_eps.derivative_matrix(x, cols) * col_weight[None, :]

    kernel = np.zeros((disc.size, disc.size), dtype=complex)
    outer_a = xa <= -eps
    outer_b = xb >= eps
    block_a = np.zeros((len(xa), disc.size), dtype=complex)
    block_b = np.zeros((len(xb), disc.size), dtype=complex)
    block_a[outer_a] = rows(xa[outer_a])
    block_b[outer_b] = rows(xb[outer_b])
    kernel[sl["0"]] = rows(eps * x0)

    ext_a = ~outer_a
    if ext_a.any():
        x = xa[ext_a]
        c1, c2 = _fundamental_pair(spec.q, spec.r, zeta, -eps, x, opts)
        base = rows(np.array([-eps]))[0]
        dbase = drows(np.array([-eps]))[0]
        block_a[ext_a] = c1[:, None] * base[None, :] + c2[:, None] * dbase[None, :]
        # forcing by f_a on (−ε, x)
        volterra = -(c1[None, :] * c2[:, None] - c1[:, None] * c2[None, :])
        volterra = np.where(x[None, :] < x[:, None], volterra, 0.0)
        idx = np.flatnonzero(ext_a)
        block_a[np.ix_(idx, sl["a"].start + idx)] += volterra

    ext_b = ~outer_b
    if ext_b.any():
        x = xb[ext_b]
        d1, d2 = _fundamental_pair(spec.q, spec.r, zeta, eps, x, opts)
        base = rows(np.array([eps]))[0]
        dbase = drows(np.array([eps]))[0]
        block_b[ext_b] = d1[:, None] * base[None, :] + d2[:, None] * dbase[None, :]
        # forcing by f_b on (x, ε)
        volterra = d1[None, :] * d2[:, None] - d1[:, None] * d2[None, :]
        volterra = np.where(x[None, :] > x[:, None], volterra, 0.0)
        idx = np.flatnonzero(ext_b)
        block_b[np.ix_(idx, sl["b"].start + idx)] += volterra

    kernel[sl["a"]] = block_a
    kernel[sl["b"]] = block_b
    return kernel


def apply_kernel(kernel: np.ndarray, disc: SpaceDiscretization, values: np.ndarray) -> np.ndarray:
    mass = disc.sqrt_mass**2
    return kernel @ (mass * values)


def restrict_columns(weighted: np.ndarray, disc: SpaceDiscretization, pieces: Iterable[str]) -> np.ndarray:
    """Weighted matrix acting only on the listed components of ℒ."""
    keep = np.zeros(disc.size, dtype=bool)
    sl = disc.slices()
    for piece in pieces:
        keep[sl[piece]] = True
    return weighted[:, keep]


def sigma_max(matrix: np.ndarray) -> float:
    """Largest singular value; ARPACK first, dense SVD if it does not converge."""
    if min(matrix.shape) < 3:
        return float(svdvals(matrix)[0])
    try:
        values = svds(matrix, k=1, which="LM", return_singular_vectors=False)
        return float(np.max(values))
    except (ArpackNoConvergence, ValueError):
        logger.warning("greens.svds_fallback", shape=matrix.shape)
        return float(svdvals(matrix)[0])
