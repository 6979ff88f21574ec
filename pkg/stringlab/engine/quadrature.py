from __future__ import annotations

from functools import lru_cache
from typing import Iterable

import numpy as np
from numpy.polynomial.legendre import leggauss


@lru_cache(maxsize=64)
def _reference_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = leggauss(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def panel_edges(lo: float, hi: float, cuts: Iterable[float] = ()) -> np.ndarray:
    inner = sorted({float(c) for c in cuts if lo < c < hi})
    return np.array([lo, *inner, hi], dtype=float)


def composite_gauss(
    lo: float,
    hi: float,
    nodes: int,
    cuts: Iterable[float] = (),
    min_panel_nodes: int = 8,
) -> tuple[np.ndarray, np.ndarray]:
    """Gauss–Legendre nodes and weights on [lo, hi] split into panels at ``cuts``.

    ``nodes`` are shared between panels in proportion to panel length, with at
    least ``min_panel_nodes`` per panel.
    """
    edges = panel_edges(lo, hi, cuts)
    lengths = np.diff(edges)
    share = np.maximum(min_panel_nodes, np.round(nodes * lengths / (hi - lo)).astype(int))
    xs, ws = [], []
    for (left, right), n in zip(zip(edges[:-1], edges[1:]), share):
        t, w = _reference_rule(int(n))
        half = 0.5 * (right - left)
        xs.append(left + half * (t + 1.0))
        ws.append(half * w)
    return np.concatenate(xs), np.concatenate(ws)

