"""Matplotlib rendering for sense maps and report figures.

All figures are written as SVG with a fixed hash salt and no embedded
timestamp, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import SweepTable
from .tsne import SensePlotData

_HASHSALT = "senseknn"
_NO_DATE = {"Date": None}


def _save_svg(fig) -> bytes:
    buf = io.BytesIO()
    with plt.rc_context({"svg.hashsalt": _HASHSALT}):
        fig.savefig(buf, format="svg", metadata=_NO_DATE, bbox_inches="tight")
    plt.close(fig)
    return buf.getvalue()


def render_sense_scatter(data: SensePlotData) -> bytes:
    """Scatter of projected points, one color per sense, legend with counts."""
    fig, ax = plt.subplots(figsize=(6.0, 5.0))
    cmap = plt.get_cmap("tab20" if len(data.legend) > 10 else "tab10")
    color_for = {
        entry.sense: cmap(i % cmap.N) for i, entry in enumerate(data.legend)
    }
    for entry in data.legend:
        xs = [p.x for p in data.points if p.sense == entry.sense]
        ys = [p.y for p in data.points if p.sense == entry.sense]
        ax.scatter(
            xs,
            ys,
            s=22,
            color=color_for[entry.sense],
            label=f"{entry.label} ({entry.freq})",
            edgecolors="none",
            alpha=0.85,
        )
    title = data.lexelt if not data.model_tag else f"{data.lexelt} - {data.model_tag}"
    ax.set_title(title)
    ax.set_xlabel("dim 1")
    ax.set_ylabel("dim 2")
    ax.legend(loc="best", fontsize=8, framealpha=0.9)
    return _save_svg(fig)


def render_f1_curve(
    sweep_table: SweepTable,
    model_tag: str,
    dataset: str,
    mfs_f1: float | None = None,
) -> bytes:
    """F1 as a function of k, with the MFS baseline as a reference line."""
    ks = [k for k, _ in sweep_table.rows]
    f1s = [report.f1 for _, report in sweep_table.rows]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(ks, f1s, marker="o", label=model_tag or "kNN")
    best = dict(sweep_table.rows)[sweep_table.best_k].f1
    ax.scatter([sweep_table.best_k], [best], s=90, facecolors="none",
               edgecolors="tab:red", label=f"best k={sweep_table.best_k}")
    if mfs_f1 is not None:
        ax.axhline(mfs_f1, linestyle="--", color="gray", label="MFS baseline")
    ax.set_xlabel("k")
    ax.set_ylabel("micro-F1 (%)")
    ax.set_title(f"{dataset}: F1 vs k")
    ax.set_xticks(ks)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    return _save_svg(fig)
