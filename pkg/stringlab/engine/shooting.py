"""Shooting primitives for −y'' + Q y = λ W y on a chain of segments.

A chain is a sequence of segments, each with its own local variable t and a
positive ``scale`` = dx/dt linking it to the physical variable. Values are
continuous across junctions and physical derivatives are continuous, so the
local derivative is rescaled by the ratio of neighbouring scales.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Callable, Literal, Sequence

import numpy as np
from scipy.integrate import simpson, solve_ivp
from scipy.optimize import brentq, root_scalar

from stringlab.core.config import Settings
from stringlab.core.errors import BracketingError, NumericalFailure
from stringlab.core.log import get_logger
from stringlab.models.coeffs import CoefficientFunction

logger = get_logger(__name__)

_ANGLE_SNAP = 1e-14
_COUNT_SLACK = 1e-10

Forcing = Callable[[float], complex]


@dataclass(frozen=True)
class OdeOptions:
    method: str = "DOP853"
    rtol: float = 1e-10
    atol: float = 1e-12

    @classmethod
    def from_settings(cls, settings: Settings) -> "OdeOptions":
        return cls(settings.ode_method, settings.ode_rtol, settings.ode_atol)


@dataclass(frozen=True)
class Segment:
    left: float
    right: float
    q: CoefficientFunction
    weight: CoefficientFunction
    scale: float = 1.0
    measure: float = 1.0
    label: str = ""

    def __post_init__(self) -> None:
        if not self.right > self.left:
            raise NumericalFailure(f"segment [{self.left}, {self.right}] is empty")
        if not self.scale > 0:
            raise NumericalFailure("segment scale must be positive")

    @property
    def breakpoints(self) -> tuple[float, ...]:
        points = set(self.q.breakpoints) | set(self.weight.breakpoints)
        return tuple(sorted(p for p in points if self.left < p < self.right))

    def spans(self) -> list[tuple[float, float]]:
        edges = [self.left, *self.breakpoints, self.right]
        return list(zip(edges[:-1], edges[1:]))

    def grid(self, n: int) -> np.ndarray:
        xs = np.linspace(self.left, self.right, n)
        if self.breakpoints:
            xs = np.unique(np.concatenate([xs, np.asarray(self.breakpoints)]))
        return xs

    def physical(self, t):
        return self.scale * t

    def ratio_bound(self, samples: int = 257) -> float:
        """max |Q/W| over the segment, sampled."""
        t = self.grid(samples)
        return float(np.max(np.abs(np.asarray(self.q(t)) / np.asarray(self.weight(t)))))


@dataclass(frozen=True)
class Chain:
    """Segments glued end to end with Robin forms (c, s) at both outer ends.

    A form (c, s) stands for c·y + s·y' = 0 in physical derivatives.
    """

    segments: tuple[Segment, ...]
    left_form: tuple[float, float]
    right_form: tuple[float, float]
    match_segment: int = 0
    match_point: float | None = None

    @property
    def left_vector(self) -> tuple[float, float]:
        c, s = self.left_form
        return -s, c

    @property
    def right_vector(self) -> tuple[float, float]:
        c, s = self.right_form
        return -s, c

    @property
    def match(self) -> tuple[int, float]:
        seg = self.segments[self.match_segment]
        t = 0.5 * (seg.left + seg.right) if self.match_point is None else self.match_point
        return self.match_segment, t

    def start_phase(self) -> float:
        c, s = self.left_form
        phi = math.atan2(-s, self.segments[0].scale * c) % math.pi
        if phi > math.pi - _ANGLE_SNAP or phi < _ANGLE_SNAP:
            phi = 0.0
        return phi

    def target_phase(self) -> float:
        c, s = self.right_form
        phi = math.atan2(-s, self.segments[-1].scale * c) % math.pi
        if phi < _ANGLE_SNAP or phi > math.pi - _ANGLE_SNAP:
            phi = math.pi
        return phi

    def ratio_bound(self) -> float:
        return max(seg.ratio_bound() for seg in self.segments)


def _remap_phase(phi: float, ratio: float) -> float:
    k = math.floor(phi / math.pi)
    local = phi - k * math.pi
    return k * math.pi + math.atan2(math.sin(local), ratio * math.cos(local))


def _check(sol, what: str):
    if not sol.success:
        raise NumericalFailure(f"{what}: integrator failed ({sol.message})")
    return sol


def phase_at_end(chain: Chain, lam: float, opts: OdeOptions) -> float:
    """Prüfer phase at the right end for spectral parameter ``lam``."""
    phi = chain.start_phase()
    for k, seg in enumerate(chain.segments):
        if k:
            phi = _remap_phase(phi, seg.scale / chain.segments[k - 1].scale)

        def rhs(t, u, seg=seg):
            sn = math.sin(u[0])
            cs = math.cos(u[0])
            return [cs * cs + (lam * seg.weight(t) - seg.q(t)) * sn * sn]

        for lo, hi in seg.spans():
            sol = _check(
                solve_ivp(rhs, (lo, hi), [phi], method=opts.method, rtol=opts.rtol, atol=opts.atol),
                "phase integration",
            )
            phi = float(sol.y[0, -1])
    return phi


def count_from_phase(phi_end: float, target: float) -> int:
    return max(0, math.ceil((phi_end - target) / math.pi - _COUNT_SLACK))


def count_below(chain: Chain, lam: float, opts: OdeOptions) -> int:
    """Number of eigenvalues strictly below ``lam``."""
    return count_from_phase(phase_at_end(chain, lam, opts), chain.target_phase())


class PhaseCache:
    """Memoized λ ↦ end phase, used to bracket every index from earlier evaluations."""

    def __init__(self, chain: Chain, opts: OdeOptions):
        self.chain = chain
        self.opts = opts
        self._lams: list[float] = []
        self._phis: list[float] = []

    def __call__(self, lam: float) -> float:
        i = bisect.bisect_left(self._lams, lam)
        if i < len(self._lams) and self._lams[i] == lam:
            return self._phis[i]
        phi = phase_at_end(self.chain, lam, self.opts)
        self._lams.insert(i, lam)
        self._phis.insert(i, phi)
        return phi

    def count(self, lam: float) -> int:
        return count_from_phase(self(lam), self.chain.target_phase())

    def bracket(self, level: float) -> tuple[float, float]:
        lo = max((lam for lam, phi in zip(self._lams, self._phis) if phi <= level), default=None)
        hi = min((lam for lam, phi in zip(self._lams, self._phis) if phi > level), default=None)
        if lo is None or hi is None or not lo < hi:
            raise BracketingError("phase level not bracketed by cached evaluations", index=-1)
        return lo, hi

    def __len__(self) -> int:
        return len(self._lams)


@dataclass(frozen=True)
class SegmentSolution:
    segment: Segment
    edges: tuple[float, ...]
    pieces: tuple[object, ...]

    def at(self, t) -> tuple[np.ndarray, np.ndarray]:
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        lo, hi = min(self.edges), max(self.edges)
        t_arr = np.clip(t_arr, lo, hi)
        ordered = sorted(self.edges)
        idx = np.clip(np.searchsorted(ordered, t_arr, side="right") - 1, 0, len(self.pieces) - 1)
        # pieces are stored in integration order; map sorted span index to that order
        if self.edges[0] > self.edges[-1]:
            idx = len(self.pieces) - 1 - idx
        first = self.pieces[0](t_arr[:1])
        y = np.empty(t_arr.shape, dtype=first.dtype)
        d = np.empty(t_arr.shape, dtype=first.dtype)
        for j in np.unique(idx):
            mask = idx == j
            state = self.pieces[j](t_arr[mask])
            y[mask] = state[0]
            d[mask] = state[1]
        return y, d


def integrate_segment(
    seg: Segment,
    zeta: complex,
    t0: float,
    state0: Sequence[complex],
    t1: float,
    opts: OdeOptions,
    forcing: Forcing | None = None,
) -> SegmentSolution:
    """Integrate y'' = (Q − ζW) y − W f in the local variable from t0 to t1."""
    complex_run = (
        isinstance(zeta, complex) and zeta.imag != 0.0
    ) or forcing is not None or any(isinstance(s, complex) for s in state0)
    dtype = complex if complex_run else float
    zeta_v = complex(zeta) if complex_run else float(np.real(zeta))

    def rhs(t, u):
        coeff = seg.q(t) - zeta_v * seg.weight(t)
        dd = coeff * u[0]
        if forcing is not None:
            dd = dd - seg.weight(t) * forcing(t)
        return [u[1], dd]

    cuts = [p for p in seg.breakpoints if min(t0, t1) < p < max(t0, t1)]
    if t1 < t0:
        cuts = cuts[::-1]
    edges = [t0, *cuts, t1]
    state = np.asarray(state0, dtype=dtype)
    pieces = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sol = _check(
            solve_ivp(
                rhs, (lo, hi), state, method=opts.method, rtol=opts.rtol,
                atol=opts.atol, dense_output=True,
            ),
            "linear shooting",
        )
        pieces.append(sol.sol)
        state = sol.y[:, -1]
    return SegmentSolution(seg, tuple(edges), tuple(pieces))


@dataclass(frozen=True)
class ChainSolution:
    """Linear combination of shooting solutions over every segment of a chain."""

    chain: Chain
    parts: tuple[tuple[SegmentSolution, ...], ...]
    coeffs: tuple[complex, ...] = (1.0,)

    def state(self, k: int, t) -> tuple[np.ndarray, np.ndarray]:
        """Value and local derivative on segment ``k``."""
        y = d = 0.0
        for coeff, part in zip(self.coeffs, self.parts):
            yk, dk = part[k].at(t)
            y = y + coeff * yk
            d = d + coeff * dk
        return y, d

    def physical_state(self, k: int, t) -> tuple[np.ndarray, np.ndarray]:
        y, d = self.state(k, t)
        return y, d / self.chain.segments[k].scale

    def end_state(self, side: Literal["left", "right"]) -> tuple[complex, complex]:
        k = 0 if side == "left" else len(self.chain.segments) - 1
        seg = self.chain.segments[k]
        t = seg.left if side == "left" else seg.right
        y, d = self.physical_state(k, t)
        return y[0], d[0]

    def plus(self, other: "ChainSolution", coeff: complex) -> "ChainSolution":
        return ChainSolution(
            self.chain,
            self.parts + other.parts,
            self.coeffs + tuple(coeff * c for c in other.coeffs),
        )


def shoot(
    chain: Chain,
    zeta: complex,
    start: Sequence[complex],
    opts: OdeOptions,
    direction: Literal["forward", "backward"] = "forward",
    forcing: Sequence[Forcing | None] | None = None,
) -> ChainSolution:
    """Shoot through the whole chain from one end with physical initial data ``start``."""
    segs = chain.segments
    order = range(len(segs)) if direction == "forward" else range(len(segs) - 1, -1, -1)
    forcing = forcing or [None] * len(segs)
    parts: dict[int, SegmentSolution] = {}
    state: list[complex] | None = None
    prev: Segment | None = None
    for k in order:
        seg = segs[k]
        if state is None:
            state = [start[0], start[1] * seg.scale]
        else:
            state = [state[0], state[1] * seg.scale / prev.scale]
        t0, t1 = (seg.left, seg.right) if direction == "forward" else (seg.right, seg.left)
        sol = integrate_segment(seg, zeta, t0, state, t1, opts, forcing[k])
        parts[k] = sol
        y_end, d_end = sol.at(t1)
        state = [y_end[0], d_end[0]]
        prev = seg
    return ChainSolution(chain, (tuple(parts[k] for k in range(len(segs))),))


def right_form_value(solution: ChainSolution) -> complex:
    c, s = solution.chain.right_form
    y, dy = solution.end_state("right")
    return c * y + s * dy


def segment_transfer(seg: Segment, lam: complex, opts: OdeOptions) -> np.ndarray:
    """Physical-coordinate transfer matrix of one segment (det = 1)."""
    complex_run = isinstance(lam, complex) and lam.imag != 0.0
    dtype = complex if complex_run else float

    def rhs(t, u):
        coeff = seg.q(t) - lam * seg.weight(t)
        return [u[1], coeff * u[0], u[3], coeff * u[2]]

    state = np.array([1.0, 0.0, 0.0, 1.0], dtype=dtype)
    for lo, hi in seg.spans():
        sol = _check(
            solve_ivp(rhs, (lo, hi), state, method=opts.method, rtol=opts.rtol, atol=opts.atol),
            "transfer matrix",
        )
        state = sol.y[:, -1]
    local = np.array([[state[0], state[2]], [state[1], state[3]]])
    scale = np.diag([1.0, 1.0 / seg.scale])
    return scale @ local @ np.diag([1.0, seg.scale])


def transfer_matrices(chain: Chain, lam: complex, opts: OdeOptions) -> list[np.ndarray]:
    return [segment_transfer(seg, lam, opts) for seg in chain.segments]


def composed_transfer(chain: Chain, lam: complex, opts: OdeOptions) -> np.ndarray:
    total = np.eye(2)
    for m in transfer_matrices(chain, lam, opts):
        total = m @ total
    return total


def characteristic(chain: Chain, lam: float, opts: OdeOptions) -> float:
    """Right boundary form of the solution launched from the left boundary vector."""
    vec = composed_transfer(chain, lam, opts) @ np.asarray(chain.left_vector)
    c, s = chain.right_form
    return float(np.real(c * vec[0] + s * vec[1]))


def lower_bound(chain: Chain) -> float:
    return -chain.ratio_bound() - 1.0


def locate_eigenvalues(chain: Chain, n_max: int, settings: Settings) -> list[float]:
    """First ``n_max`` eigenvalues, indexed by Prüfer winding.

    Each index n is located as the root of φ(b; λ) = target + nπ, which is
    strictly increasing in λ, then polished by a secant iteration on the
    boundary mismatch.
    """
    opts = OdeOptions.from_settings(settings)
    cache = PhaseCache(chain, opts)
    target = chain.target_phase()

    lo = lower_bound(chain)
    doublings = 0
    while cache.count(lo) > 0:
        lo = 2.0 * lo - 1.0
        doublings += 1
        if doublings > settings.max_bracket_doublings:
            raise BracketingError("no eigenvalue-free lower bound found", index=0)

    hi = max(1.0, abs(lo))
    doublings = 0
    while cache.count(hi) < n_max:
        hi *= 2.0
        doublings += 1
        if doublings > settings.max_bracket_doublings:
            raise BracketingError(
                f"only {cache.count(hi)} eigenvalues found below {hi:.3e}", index=cache.count(hi)
            )

    lams: list[float] = []
    for n in range(n_max):
        level = target + n * math.pi
        try:
            left, right = cache.bracket(level)
            coarse = brentq(
                lambda lam: cache(lam) - level,
                left,
                right,
                xtol=0.1 * settings.eig_xtol(right),
                rtol=4 * np.finfo(float).eps,
            )
        except (ValueError, BracketingError) as exc:
            raise BracketingError(f"eigenvalue bracketing failed: {exc}", index=n) from exc
        lam = _polish(chain, coarse, cache.bracket(level), opts, settings)
        if lams and not lam > lams[-1]:
            raise BracketingError("eigenvalues not strictly increasing", index=n)
        lams.append(lam)
    logger.debug("shooting.located", n_max=n_max, phase_evaluations=len(cache), lower=lo)
    return lams


def _polish(
    chain: Chain, lam: float, bracket: tuple[float, float], opts: OdeOptions, settings: Settings
) -> float:
    left, right = bracket
    step = max(settings.eig_xtol(lam), 1e-3 * (right - left))
    try:
        res = root_scalar(
            lambda x: characteristic(chain, x, opts),
            x0=lam,
            x1=lam + step if lam + step <= right else lam - step,
            method="secant",
            xtol=1e-2 * settings.eig_xtol(lam),
            maxiter=12,
        )
    except (ArithmeticError, ValueError):
        return lam
    if res.converged and left <= res.root <= right and abs(res.root - lam) <= 10 * settings.eig_xtol(lam):
        return float(res.root)
    return lam


@dataclass
class SampledPiece:
    segment: Segment
    t: np.ndarray
    y: np.ndarray
    d: np.ndarray


def eigenfunction_samples(
    chain: Chain, lam: float, settings: Settings
) -> list[SampledPiece]:
    """Normalized eigenfunction samples by bidirectional shooting matched at ``chain.match``.

    Norm: Σ measure·∫ W |y|² dt over the segments. Sign: the first sample with
    magnitude above 0.1·max is positive.
    """
    opts = OdeOptions.from_settings(settings)
    left = shoot(chain, lam, chain.left_vector, opts, "forward")
    right = shoot(chain, lam, chain.right_vector, opts, "backward")
    m, tm = chain.match
    yl, dl = left.state(m, tm)
    yr, dr = right.state(m, tm)
    denom = yr[0] ** 2 + dr[0] ** 2
    if denom == 0.0:
        raise NumericalFailure("backward shot vanished at the matching point")
    kappa = (yl[0] * yr[0] + dl[0] * dr[0]) / denom

    pieces: list[SampledPiece] = []
    for k, seg in enumerate(chain.segments):
        t = seg.grid(settings.grid_points)
        if k < m:
            y, d = left.state(k, t)
        elif k > m:
            y, d = right.state(k, t)
            y, d = kappa * y, kappa * d
        else:
            y1, d1 = left.state(k, t)
            y2, d2 = right.state(k, t)
            take_left = t <= tm
            y = np.where(take_left, y1, kappa * y2)
            d = np.where(take_left, d1, kappa * d2)
        pieces.append(SampledPiece(seg, t, np.real(y), np.real(d)))

    norm2 = sum(
        p.segment.measure * simpson(np.asarray(p.segment.weight(p.t)) * p.y**2, x=p.t) for p in pieces
    )
    if not norm2 > 0:
        raise NumericalFailure("eigenfunction has zero norm")
    scale = 1.0 / math.sqrt(norm2)
    values = np.concatenate([p.y for p in pieces])
    peak = np.max(np.abs(values))
    first = values[np.argmax(np.abs(values) > 0.1 * peak)]
    if first < 0:
        scale = -scale
    for p in pieces:
        p.y = p.y * scale
        p.d = p.d * scale
    return pieces
