"""Static SVG convergence plots."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from stringlab.core.log import get_logger  # noqa: E402

logger = get_logger(__name__)

HASH_SALT = "stringlab"


def _style() -> None:
    matplotlib.rcParams["svg.hashsalt"] = HASH_SALT
    matplotlib.rcParams["svg.fonttype"] = "path"
    matplotlib.rcParams["font.family"] = "DejaVu Sans"


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.debug("artifact.svg", path=str(path))
    return path


def plot_convergence(
    path: str | Path,
    title: str,
    series: Mapping[str, tuple[Sequence[float], Sequence[float]]],
    ylabel: str = "gap",
    guide: bool = True,
) -> Path:
    """Gap against ε on log-log axes with a dashed √ε reference through the first series."""
    _style()
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    anchor = None
    for label, (eps, values) in series.items():
        eps_arr, val_arr = np.asarray(eps, float), np.asarray(values, float)
        keep = val_arr > 0
        if not keep.any():
            continue
        ax.loglog(eps_arr[keep], val_arr[keep], marker="o", linewidth=1.2, label=label)
        if anchor is None:
            anchor = (eps_arr[keep][0], val_arr[keep][0], eps_arr[keep])
    if guide and anchor is not None:
        e0, g0, eps_arr = anchor
        ax.loglog(eps_arr, g0 * np.sqrt(eps_arr / e0), linestyle="--", color="0.4", label="√ε")
    ax.set_xlabel("ε")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, which="major", linestyle=":", linewidth=0.6)
    if ax.has_data():
        ax.legend(fontsize=8)
    return _save(fig, Path(path))


def plot_cluster(
    path: str | Path,
    lam: float,
    radius: float,
    perturbed: Mapping[float, Sequence[float]],
) -> Path:
    """Perturbed eigenvalues inside the cluster window around a multiple limit eigenvalue."""
    _style()
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for eps, lams in perturbed.items():
        near = [x for x in lams if abs(x - lam) < 2 * radius]
        ax.semilogx([eps] * len(near), near, linestyle="none", marker="x", color="C0")
    ax.axhline(lam, color="0.3", linewidth=1.0)
    ax.axhspan(lam - radius, lam + radius, color="C1", alpha=0.15)
    ax.set_xlabel("ε")
    ax.set_ylabel("λ")
    ax.set_title(f"cluster around λ = {lam:.6g}")
    ax.grid(True, which="major", linestyle=":", linewidth=0.6)
    return _save(fig, Path(path))
