"""Matplotlib figure rendering for heatmaps and report summaries.

Figures are written to files next to the delimited outputs; nothing here
opens a window (the Agg backend is forced on import).
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .placement import HeatmapSurface


def save_heatmap_png(surfaces: dict[str, HeatmapSurface], metric: str, path: Path, title: str = "") -> Path:
    """All mounting surfaces of one heatmap as a row of panels."""
    names = sorted(surfaces)
    fig, axes = plt.subplots(1, len(names), figsize=(3.2 * len(names), 3.4), squeeze=False)
    for ax, name in zip(axes[0], names):
        hm = surfaces[name]
        extent = [
            hm.u_coords[0], hm.u_coords[-1] if len(hm.u_coords) > 1 else hm.u_coords[0] + 1.0,
            hm.v_coords[0], hm.v_coords[-1] if len(hm.v_coords) > 1 else hm.v_coords[0] + 1.0,
        ]
        im = ax.imshow(hm.values, origin="lower", extent=extent, vmin=0.0, vmax=1.0,
                       cmap="viridis", aspect="equal")
        ax.set_title(name, fontsize=9)
        ax.set_xlabel("u [m]", fontsize=8)
        ax.set_ylabel("v [m]", fontsize=8)
        ax.tick_params(labelsize=7)
    fig.colorbar(im, ax=axes[0].tolist(), shrink=0.85, label=metric)
    if title:
        fig.suptitle(title, fontsize=10)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=140)
    plt.close(fig)
    return path


def save_combo_bars_png(rows: list[dict], path: Path) -> Path:
    """Grouped bars of per-combination maxima relative to the full set,
    one panel per (scene, roi, metric) group."""
    groups: dict[tuple[str, str, str], list[dict]] = {}
    for r in rows:
        groups.setdefault((r["scene"], r["roi"], r["metric"]), []).append(r)
    keys = sorted(groups)
    ncols = min(3, len(keys))
    nrows = (len(keys) + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(4.0 * ncols, 2.8 * nrows), squeeze=False)
    for k, key in enumerate(keys):
        ax = axes[k // ncols][k % ncols]
        combos = groups[key]
        labels = [c["combo"] for c in combos]
        vals = [c["relative"] for c in combos]
        ax.bar(np.arange(len(vals)), vals, color="steelblue")
        ax.set_xticks(np.arange(len(vals)))
        ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=7)
        ax.set_ylim(0.0, 1.1)
        ax.axhline(1.0, color="gray", lw=0.8, ls="--")
        ax.set_title(" / ".join(key), fontsize=8)
        ax.set_ylabel("relative max", fontsize=8)
        ax.tick_params(labelsize=7)
    for k in range(len(keys), nrows * ncols):
        axes[k // ncols][k % ncols].axis("off")
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=140)
    plt.close(fig)
    return path


def save_interpretation_boxplot_png(records, metric: str, path: Path) -> Path:
    """Metric distribution over poses, one box per interpretation,
    one panel per (scene, roi)."""
    groups: dict[tuple[str, str], dict[str, list[float]]] = {}
    for r in records:
        panel = groups.setdefault((r.scene_id, r.roi_id), {})
        panel.setdefault(r.interp_id, []).append(r.metric(metric))
    keys = sorted(groups)
    ncols = min(3, len(keys))
    nrows = (len(keys) + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(4.0 * ncols, 3.0 * nrows), squeeze=False)
    for k, key in enumerate(keys):
        ax = axes[k // ncols][k % ncols]
        panel = groups[key]
        labels = sorted(panel)
        ax.boxplot([panel[l] for l in labels], tick_labels=labels)
        ax.set_title(" / ".join(key), fontsize=8)
        ax.set_ylabel(metric, fontsize=8)
        ax.tick_params(axis="x", rotation=45, labelsize=7)
        ax.tick_params(axis="y", labelsize=7)
    for k in range(len(keys), nrows * ncols):
        axes[k // ncols][k % ncols].axis("off")
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=140)
    plt.close(fig)
    return path
