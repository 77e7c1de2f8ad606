"""Report figures.  Uses ``matplotlib.figure.Figure`` directly, so nothing
touches pyplot's global state and no display backend is needed."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure



def _figure(width: float = 6.0, height: "float | None" = None) -> Figure:
    golden = (np.sqrt(5.0) - 1.0) / 2.0
    fig = Figure(figsize=(width, height or width * golden), dpi=120)
    FigureCanvasAgg(fig)
    return fig


def _save(fig: Figure, path: "str | Path") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata={"Software": None} if path.suffix == ".png" else None, bbox_inches="tight")
    return path


def plot_pr_curves(curves: Mapping, path: "str | Path", max_classes: int = 12) -> Path:
    """Step plot of the soft precision-recall points, one line per class."""
    fig = _figure()
    ax = fig.add_subplot(111)
    for cls in sorted(curves)[:max_classes]:
        c = curves[cls]
        if not c.recall:
            continue
        ax.step([0.0, *c.recall], [c.precision[0], *c.precision], where="post", label=str(cls), lw=1.2)
    ax.set_xlim(0, 1.02)
    ax.set_ylim(0, 1.02)
    ax.set_xlabel("soft recall")
    ax.set_ylabel("soft precision")
    ax.set_title("Soft precision-recall per class")
    if curves:
        ax.legend(fontsize=6, loc="lower left", frameon=False)
    return _save(fig, path)


def plot_heatmap(names: Sequence[str], matrix: np.ndarray, path: "str | Path", title: str,
                 vmin: float = -1.0, vmax: float = 1.0) -> Path:
    n = len(names)
    fig = _figure(1.2 + 0.7 * n, 0.9 + 0.6 * n)
    ax = fig.add_subplot(111)
    im = ax.imshow(np.ma.masked_invalid(matrix), vmin=vmin, vmax=vmax, cmap="viridis")
    ax.set_xticks(range(n))
    ax.set_yticks(range(n))
    ax.set_xticklabels(names, rotation=45, ha="right")
    ax.set_yticklabels(names)
    for i in range(n):
        for j in range(n):
            v = matrix[i, j]
            ax.text(j, i, "n/a" if np.isnan(v) else f"{v:.2f}", ha="center", va="center",
                    color="white" if not np.isnan(v) and v < (vmin + vmax) / 2 else "black", fontsize=7)
    ax.set_title(title)
    fig.colorbar(im, ax=ax, shrink=0.8)
    return _save(fig, path)


def plot_mae_curves(fits: Mapping, path: "str | Path") -> Path:
    labels = {1: "same verb, different object", 2: "different verb, same object", 3: "both different"}
    fig = _figure()
    ax = fig.add_subplot(111)
    for c in sorted(fits):
        fit = fits[c]
        line, = ax.plot(fit.grid, fit.mae, lw=1.2, label=f"{c}: {labels.get(c, c)} (w*={fit.w_grid:.3f})")
        ax.axvline(fit.w_grid, color=line.get_color(), ls=":", lw=0.8)
    ax.set_xlabel("verb weight w")
    ax.set_ylabel("MAE")
    ax.set_xlim(0, 1)
    ax.legend(fontsize=7, frameon=False)
    ax.set_title("MAE of weighted aggregation vs human similarity")
    return _save(fig, path)
