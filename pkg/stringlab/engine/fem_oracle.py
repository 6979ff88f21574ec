"""Finite-element reference eigenvalues for −y'' + q y = λ w y with Robin ends.

Linear elements, lumped mass with exactly integrated weight, natural Robin
terms, Dirichlet nodes eliminated, shift-invert Lanczos for the lowest modes.
Used as an independent check of the shooting engine.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.sparse import diags
from scipy.sparse.linalg import eigsh

from stringlab.core.errors import DomainError, NumericalFailure
from stringlab.engine.slsolve import SLProblem
from stringlab.models.coeffs import EpsWeight, ProblemSpec

_DIRICHLET_TOL = 1e-14


def aligned_mesh(edges: Sequence[float], counts: Sequence[int]) -> np.ndarray:
    """Uniform sub-meshes between consecutive ``edges`` glued into one node array."""
    parts = [np.linspace(lo, hi, n + 1)[:-1] for lo, hi, n in zip(edges[:-1], edges[1:], counts)]
    return np.concatenate([*parts, [edges[-1]]])


def _lumped(nodes: np.ndarray, fn: Callable[[np.ndarray], np.ndarray], order: int = 4) -> np.ndarray:
    """∫ fn φ_i for every hat function φ_i, Gauss–Legendre per element."""
    t, w = leggauss(order)
    lo, hi = nodes[:-1], nodes[1:]
    half = 0.5 * (hi - lo)
    pts = lo[:, None] + half[:, None] * (t[None, :] + 1.0)
    vals = np.asarray(fn(pts.ravel()), dtype=float).reshape(pts.shape)
    phi_right = 0.5 * (t + 1.0)
    phi_left = 1.0 - phi_right
    left_part = np.sum(vals * phi_left * w, axis=1) * half
    right_part = np.sum(vals * phi_right * w, axis=1) * half
    out = np.zeros(nodes.size)
    out[:-1] += left_part
    out[1:] += right_part
    return out


def fem_eigenvalues(
    nodes: np.ndarray,
    q: Callable[[np.ndarray], np.ndarray],
    weight: Callable[[np.ndarray], np.ndarray],
    left_form: tuple[float, float],
    right_form: tuple[float, float],
    k: int,
    sigma: float,
) -> np.ndarray:
    """Lowest ``k`` eigenvalues of the P1 discretization on ``nodes``."""
    h = np.diff(nodes)
    n = nodes.size
    main = np.zeros(n)
    main[:-1] += 1.0 / h
    main[1:] += 1.0 / h
    off = -1.0 / h
    main = main + _lumped(nodes, q)
    mass = _lumped(nodes, weight)

    keep = np.ones(n, dtype=bool)
    ca, sa = left_form
    cb, sb = right_form
    if abs(sa) < _DIRICHLET_TOL:
        keep[0] = False
    else:
        main[0] -= ca / sa
    if abs(sb) < _DIRICHLET_TOL:
        keep[-1] = False
    else:
        main[-1] += cb / sb

    stiffness = diags([off, main, off], [-1, 0, 1], format="csc")
    idx = np.flatnonzero(keep)
    stiffness = stiffness[idx][:, idx]
    mass_m = diags(mass[idx], 0, format="csc")
    if k >= idx.size - 1:
        raise DomainError(f"mesh with {idx.size} free nodes cannot resolve {k} eigenvalues")
    try:
        vals = eigsh(stiffness, k=k, M=mass_m, sigma=sigma, which="LM", return_eigenvectors=False)
    except Exception as exc:  # ARPACK reports convergence trouble with several exception types
        raise NumericalFailure(f"finite-element eigensolver failed: {exc}") from exc
    return np.sort(vals)


def richardson(coarse: np.ndarray, fine: np.ndarray, order: int = 2) -> np.ndarray:
    """Extrapolate two sequences computed on meshes h and h/2."""
    factor = 2.0**order
    return fine + (fine - coarse) / (factor - 1.0)


def _sigma(lower: float) -> float:
    return lower - 1.0


def sl_oracle_eigenvalues(p: SLProblem, k: int, elements: int = 4000, extrapolate: bool = True) -> np.ndarray:
    hom = p.homogeneous()
    cuts = sorted({p.left, p.right, *hom.segment.breakpoints})
    lengths = np.diff(cuts)

    def run(total: int) -> np.ndarray:
        counts = np.maximum(2, np.round(total * lengths / lengths.sum()).astype(int))
        nodes = aligned_mesh(cuts, counts)
        lower = -hom.segment.ratio_bound() - 1.0
        if hom.left_bc.form[1] != 0 or hom.right_bc.form[1] != 0:
            lower -= _robin_shift(hom.left_bc.form, hom.right_bc.form)
        return fem_eigenvalues(nodes, hom.q, hom.weight, hom.left_bc.form, hom.right_bc.form, k, _sigma(lower))

    coarse = run(elements)
    if not extrapolate:
        return coarse
    return richardson(coarse, run(2 * elements))


def _robin_shift(left_form: tuple[float, float], right_form: tuple[float, float]) -> float:
    shift = 0.0
    for c, s in (left_form, right_form):
        if s != 0.0:
            shift += abs(c / s) ** 2
    return shift


def perturbed_oracle_eigenvalues(
    spec: ProblemSpec, eps: float, k: int, elements: int = 4000, extrapolate: bool = True
) -> np.ndarray:
    """Reference eigenvalues of −y'' + q y = λ r_ε y on (a, b) with the Robin ends of ``spec``."""
    weight = EpsWeight(spec, eps)
    cuts = sorted(
        {spec.a, -eps, eps, spec.b}
        | {p for p in spec.q.breakpoints if spec.a < p < spec.b}
        | {p for p in spec.r.breakpoints if spec.a < p < spec.b and abs(p) > eps}
        | {eps * p for p in spec.h.breakpoints if -1.0 < p < 1.0}
    )
    # element counts follow the length in the rescaled variable, so the inner layer
    # gets as many elements per unit t as the outer pieces per unit x
    local = np.array(
        [(hi - lo) / eps if -eps <= lo and hi <= eps else hi - lo for lo, hi in zip(cuts[:-1], cuts[1:])]
    )
    q_ratio = float(np.max(np.abs(spec.q.sample(spec.a, spec.b, 257)[1]))) / max(
        1e-300, min(float(np.min(spec.r.sample(spec.a, spec.b, 257)[1])), 1.0)
    )
    lower = -q_ratio - 1.0 - _robin_shift(spec.left_form(), spec.right_form())

    def run(total: int) -> np.ndarray:
        counts = np.maximum(2, np.round(total * local / local.sum()).astype(int))
        nodes = aligned_mesh(cuts, counts)
        return fem_eigenvalues(
            nodes, spec.q, weight, spec.left_form(), spec.right_form(), k, _sigma(lower)
        )

    coarse = run(elements)
    if not extrapolate:
        return coarse
    return richardson(coarse, run(2 * elements))


def dirichlet_model_characteristic(lam: float, eps: float, a: float = -1.0, b: float = 1.0) -> float:
    """Closed-form characteristic function for q≡0, r≡h≡1 with Dirichlet ends.

    Outer pieces carry sin(k(x − a)) and sin(k(b − x)), the inner piece solves
    w'' + λ w = 0 in the rescaled variable; the value vanishes exactly at the
    perturbed eigenvalues.
    """
    if lam <= 0:
        raise DomainError("closed form assumes λ > 0")
    k = math.sqrt(lam)
    la, lb = -eps - a, b - eps
    # left state at t = −1 in rescaled derivatives
    y0, d0 = math.sin(k * la), eps * k * math.cos(k * la)
    c, s = math.cos(2 * k), math.sin(2 * k)
    y1 = y0 * c + d0 * s / k
    d1 = -y0 * k * s + d0 * c
    # match to sin(k(b − x)) at x = ε: value sin(k lb), rescaled derivative −ε k cos(k lb)
    return y1 * (-eps * k * math.cos(k * lb)) - d1 * math.sin(k * lb)
