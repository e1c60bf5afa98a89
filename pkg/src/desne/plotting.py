"""Report figures.

PNG figures go through matplotlib's Agg backend with the software/date
metadata removed, so identical inputs give identical bytes. The export
scatter is written as plain SVG text for the same reason and so that the
highlighted markers can be counted in the file itself.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["embedding_png", "optimizer_error_png", "energy_ratio_png", "scatter_svg"]

ORIGINAL = "#1f77b4"
SELECTED = "#ff7f0e"


def _save(fig, path, config_hash):
    meta = {"Software": None, "Description": f"config_hash={config_hash}"}
    fig.savefig(path, format="png", dpi=100, metadata=meta)
    plt.close(fig)
    return Path(path)


def embedding_png(y, path, config_hash="", selected=None, title="embedding"):
    """Scatter of the 2-D embedding; ``selected`` indices drawn on top."""
    y = np.asarray(y)
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.scatter(y[:, 0], y[:, 1], s=4, c=ORIGINAL, linewidths=0, label="all points")
    if selected is not None and len(selected):
        s = y[np.asarray(selected)]
        ax.scatter(s[:, 0], s[:, 1], s=10, c=SELECTED, linewidths=0, label="selected")
    ax.set_title(title)
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(loc="upper right", fontsize=8)
    return _save(fig, path, config_hash)


def optimizer_error_png(summary, path, config_hash=""):
    """Bars of log10 mean |perplexity error| per optimizer.

    ``summary`` maps optimizer tag to a dict holding ``log10_mean_abs_error``
    (``None`` when the mean error is exactly zero).
    """
    tags = list(summary)
    vals = [summary[t]["log10_mean_abs_error"] for t in tags]
    floor = min([v for v in vals if v is not None], default=-16.0) - 1.0
    heights = [floor if v is None else v for v in vals]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.bar(tags, heights, color=[SELECTED if t == "de" else ORIGINAL for t in tags])
    ax.set_ylabel("log10 mean |perplexity error|")
    ax.set_title("perplexity error by optimizer")
    ax.axhline(0.0, color="black", linewidth=0.5)
    return _save(fig, path, config_hash)


def energy_ratio_png(rows, path, config_hash=""):
    """Grouped bars of energy ratio (method / baseline) per keeping ratio."""
    krs = sorted({r["keeping_ratio"] for r in rows})
    methods = list(dict.fromkeys(r["method"] for r in rows))
    ratio = {(r["method"], r["keeping_ratio"]): r["ratio"] for r in rows}
    width = 0.8 / max(len(methods), 1)
    x = np.arange(len(krs))
    fig, ax = plt.subplots(figsize=(6, 4))
    for k, m in enumerate(methods):
        ax.bar(x + k * width, [ratio[(m, kr)] for kr in krs], width, label=m)
    ax.set_xticks(x + width * (len(methods) - 1) / 2)
    ax.set_xticklabels([f"{kr:g}" for kr in krs])
    ax.set_xlabel("keeping ratio")
    ax.set_ylabel(f"DDR energy / {rows[0]['baseline']}")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    return _save(fig, path, config_hash)


def scatter_svg(y, selected_mask, path, config_hash="", size=600, margin=20):
    """Blue circles for every point, orange circles for selected ones.

    Selected markers carry ``class="selected"`` and are drawn after the
    others; the count of that class equals the number of selected points.
    """
    y = np.asarray(y, dtype=np.float64)
    mask = np.asarray(selected_mask, dtype=bool)
    lo, hi = y.min(axis=0), y.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    scale = (size - 2 * margin) / span.max()
    px = margin + (y[:, 0] - lo[0]) * scale
    py = size - margin - (y[:, 1] - lo[1]) * scale

    def circle(i, cls, color, r):
        return (f'<circle class="{cls}" data-index="{i}" cx="{px[i]:.3f}" '
                f'cy="{py[i]:.3f}" r="{r}" fill="{color}"/>')

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f"<!-- config_hash={config_hash} -->",
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    lines += [circle(i, "original", ORIGINAL, 2) for i in range(len(y))]
    lines += [circle(i, "selected", SELECTED, 3) for i in np.flatnonzero(mask)]
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return Path(path)


def log10_or_none(v):
    return None if v <= 0 else math.log10(v)
