"""Report figures: network overview map and metric bar charts (written to PNG)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.collections import LineCollection  # noqa: E402

from .ingest import HIGHWAY_CLASSES  # noqa: E402

DPI = 120
# no timestamps or version strings in the file, so reruns are byte-identical
_PNG_META = {"Software": None}

_CLASS_COLORS = {
    "motorway": "#c0392b",
    "trunk": "#d35400",
    "primary": "#e67e22",
    "secondary": "#f1c40f",
    "tertiary": "#27ae60",
    "residential": "#7f8c8d",
    "service": "#bdc3c7",
    "unclassified": "#95a5a6",
    "living_street": "#16a085",
}


def _save(fig, path):
    fig.savefig(path, dpi=DPI, metadata=_PNG_META)
    plt.close(fig)


def plot_network(network, path, title=None):
    """Segments coloured by road class, drawn in an aspect-corrected lat/lon frame."""
    b = network.aoi_bbox
    fig, ax = plt.subplots(figsize=(7, 7))
    by_class = {}
    for seg in network.segments:
        by_class.setdefault(seg.meta.road_type, []).append([(p.lon, p.lat) for p in seg.geometry])
    order = [c for c in HIGHWAY_CLASSES if c in by_class] + sorted(set(by_class) - set(HIGHWAY_CLASSES))
    # draw minor roads first so major ones stay on top
    for cls in reversed(order):
        width = 1.4 if cls in ("motorway", "trunk", "primary") else 0.6
        lc = LineCollection(by_class[cls], colors=_CLASS_COLORS.get(cls, "#34495e"), linewidths=width, label=cls)
        ax.add_collection(lc)
    ax.set_xlim(b.min_lon, b.max_lon)
    ax.set_ylim(b.min_lat, b.max_lat)
    ax.set_aspect(1.0 / math.cos(math.radians((b.min_lat + b.max_lat) / 2.0)))
    ax.set_xlabel("longitude")
    ax.set_ylabel("latitude")
    ax.set_title(title or (network.city or "road network"))
    handles, labels = ax.get_legend_handles_labels()
    if handles:
        ax.legend(handles[::-1], labels[::-1], loc="upper right", fontsize=7, frameon=False)
    fig.tight_layout()
    _save(fig, path)


def plot_length_histogram(network, path):
    lengths = [s.meta.length_m for s in network.segments]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.hist(lengths, bins=50, color="#34495e")
    ax.set_yscale("log")
    ax.set_xlabel("segment length (m)")
    ax.set_ylabel("segments")
    fig.tight_layout()
    _save(fig, path)


def plot_metrics(table: dict, path, title="scores"):
    """Horizontal bars for every non-null column of a score table.

    MAPE columns are unbounded, so they get their own panel.
    """
    bounded = [(k, v) for k, v in table.items() if v is not None and "MAPE" not in k]
    mape = [(k, v) for k, v in table.items() if v is not None and "MAPE" in k]
    panels = [p for p in (bounded, mape) if p]
    if not panels:
        panels = [[("no scored kinds", 0.0)]]
    heights = [max(1.5, 0.3 * len(p) + 0.8) for p in panels]
    fig, axes = plt.subplots(len(panels), 1, figsize=(6.5, sum(heights)), gridspec_kw={"height_ratios": heights}, squeeze=False)
    for ax, rows in zip(axes[:, 0], panels):
        labels = [k for k, _ in rows][::-1]
        values = [v for _, v in rows][::-1]
        ax.barh(labels, values, color="#2c7fb8")
        if rows is bounded:
            ax.set_xlim(0, 1)
        for y, v in enumerate(values):
            ax.text(v, y, f" {v:.3f}", va="center", fontsize=7)
        ax.tick_params(axis="y", labelsize=8)
    axes[0, 0].set_title(title)
    fig.tight_layout()
    _save(fig, path)
