"""Building and writing the four standard figures.

Each kind reads one experiment CSV and draws, per pipeline (raw features vs.
graph convolution), the trial-aggregated center curve with a min/max band:

- fig1: training loss vs. distance between class means (means_sweep CSV);
  log-scale y; overlays the midpoint-classifier rate and the raw-loss lower
  bound; vertical markers at the raw and convolved separability thresholds.
  Inventory: 2 data curves + 2 overlay curves + 2 vertical markers.
- fig2: training loss vs. graph density (density_sweep CSV); log-scale x and
  y; vertical marker at the density floor log^2(n)/n.
  Inventory: 2 data curves + 1 vertical marker.
- fig3: test loss vs. inter-class edge probability at test time (ood_sweep
  CSV); log-scale y; overlays the shifted-density rate bound.  Inventory per
  training mean-gap value: 2 data curves + 1 overlay curve.
- fig4: test error rate vs. inter-class noise multiplier (noise_sweep CSV);
  linear axes (error rates aggregate arithmetically and hit exact zeros).
  Inventory: 2 data curves.

Rendering is deterministic: fixed style, fixed dpi, no timestamps in the
output metadata, so the same CSV always produces identical image bytes.
Importing this module selects matplotlib's Agg backend.
"""

from __future__ import annotations

import dataclasses
import io
import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .data import (
    FigureError,
    aggregate_series,
    constant_value,
    load_table,
    require_columns,
)

_RC = {
    "figure.figsize": (6.4, 4.4),
    "figure.autolayout": True,
    "font.size": 10.0,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 8.0,
    "svg.hashsalt": "figures",
}

# Timestamp-free metadata per output format; formats not listed take savefig's
# defaults (which for Agg PNG would embed the matplotlib version string).
_METADATA = {
    "png": {"Software": None},
    "svg": {"Date": None},
    "pdf": {"CreationDate": None, "Producer": None, "Creator": None},
}


@dataclass(frozen=True)
class _Overlay:
    column: str
    label: str
    color: str
    marker: str


@dataclass(frozen=True)
class _Marker:
    column: str  # constant CSV column holding the position, or "" for a literal
    label: str
    color: str
    position: float | None = None


@dataclass(frozen=True)
class _Kind:
    x: str
    xlabel: str
    raw: str
    conv: str
    ylabel: str
    agg: str  # "geomean" for losses, "mean" for error rates
    xscale: str
    yscale: str
    overlays: tuple[_Overlay, ...] = ()
    markers: tuple[_Marker, ...] = ()
    group: str | None = None  # extra grid column drawn as separate curve pairs


KINDS = {
    "fig1": _Kind(
        x="distance",
        xlabel="distance between class means",
        raw="train_loss_raw",
        conv="train_loss_conv",
        ylabel="training loss",
        agg="geomean",
        xscale="linear",
        yscale="log",
        overlays=(
            _Overlay("ansatz_rate", "midpoint-classifier rate", "tab:green", "s"),
            _Overlay("lower_bound", "raw-loss lower bound", "tab:cyan", "*"),
        ),
        markers=(
            _Marker("threshold_raw", "raw separability threshold", "tab:red"),
            _Marker("threshold_conv_lower", "convolved separability threshold", "black"),
        ),
    ),
    "fig2": _Kind(
        x="p",
        xlabel="intra-class edge probability p",
        raw="train_loss_raw",
        conv="train_loss_conv",
        ylabel="training loss",
        agg="geomean",
        xscale="log",
        yscale="log",
        markers=(_Marker("p_reference", "density floor log$^2$(n)/n", "tab:red"),),
    ),
    "fig3": _Kind(
        x="q_test",
        xlabel="inter-class edge probability q' at test time",
        raw="test_loss_raw",
        conv="test_loss_conv",
        ylabel="test loss",
        agg="geomean",
        xscale="linear",
        yscale="log",
        overlays=(_Overlay("ood_rate", "shifted-density rate bound", "tab:green", "s"),),
        group="distance",
    ),
    "fig4": _Kind(
        x="rho",
        xlabel="inter-class noise multiplier",
        raw="test_err_raw",
        conv="test_err_conv",
        ylabel="test error rate",
        agg="mean",
        xscale="linear",
        yscale="linear",
    ),
}

_AGG_NOTE = {
    "geomean": "geometric mean over trials; band: min–max",
    "mean": "arithmetic mean over trials; band: min–max",
}

_OVERRIDE_OVERLAY_STYLES = (("tab:green", "s"), ("tab:cyan", "*"), ("tab:purple", "d"))
_OVERRIDE_MARKER_COLORS = ("tab:red", "black", "tab:purple")


@dataclass(frozen=True)
class FigureSpec:
    """One figure to render: which CSV, which kind, where the image goes.

    ``overlays`` and ``vertical_markers`` override the kind's defaults:
    overlays name CSV columns to draw as dashed theory curves; vertical
    markers are CSV column names (the column must be constant) or literal
    x positions.
    """

    kind: str
    csv_path: str
    out_path: str
    overlays: tuple[str, ...] | None = None
    vertical_markers: tuple[str | float, ...] | None = None
    title: str | None = None
    dpi: int = 150


def _spec_plan(spec: FigureSpec) -> _Kind:
    if spec.kind not in KINDS:
        raise FigureError(f"unknown figure kind {spec.kind!r} (use {', '.join(KINDS)})")
    kind = KINDS[spec.kind]
    if spec.overlays is not None:
        kind = dataclasses.replace(
            kind,
            overlays=tuple(
                _Overlay(col, col, *_OVERRIDE_OVERLAY_STYLES[i % len(_OVERRIDE_OVERLAY_STYLES)])
                for i, col in enumerate(spec.overlays)
            ),
        )
    if spec.vertical_markers is not None:
        markers = []
        for i, entry in enumerate(spec.vertical_markers):
            color = _OVERRIDE_MARKER_COLORS[i % len(_OVERRIDE_MARKER_COLORS)]
            if isinstance(entry, str):
                markers.append(_Marker(entry, entry, color))
            else:
                markers.append(_Marker("", f"x = {entry:g}", color, position=float(entry)))
        kind = dataclasses.replace(kind, markers=tuple(markers))
    return kind


def _draw_pair(ax, kind: _Kind, table, selector, suffix: str) -> None:
    x = table[kind.x][selector]
    for column, label, color, marker in (
        (kind.raw, "raw features", "tab:orange", "^"),
        (kind.conv, "graph convolution", "tab:blue", "o"),
    ):
        xs, center, lo, hi = aggregate_series(x, table[column][selector], kind.agg)
        (line,) = ax.plot(xs, center, color=color, marker=marker, markersize=4, label=label + suffix)
        line.set_gid("data")
        band = ax.fill_between(xs, lo, hi, color=color, alpha=0.2, linewidth=0)
        band.set_gid("band")
    for overlay in kind.overlays:
        xs, center, _, _ = aggregate_series(x, table[overlay.column][selector], "mean")
        (line,) = ax.plot(
            xs,
            center,
            color=overlay.color,
            marker=overlay.marker,
            markersize=5,
            linestyle="--",
            label=overlay.label + suffix,
        )
        line.set_gid("overlay")


def build_figure(spec: FigureSpec):
    """Build the matplotlib Figure for ``spec`` without writing it anywhere."""
    kind = _spec_plan(spec)
    table = load_table(spec.csv_path)
    needed = [kind.x, kind.raw, kind.conv]
    needed += [overlay.column for overlay in kind.overlays]
    needed += [marker.column for marker in kind.markers if marker.column]
    if kind.group is not None:
        needed.append(kind.group)
    require_columns(table, needed, spec.csv_path)

    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots()
        if kind.group is not None and np.unique(table[kind.group]).size > 1:
            for value in np.unique(table[kind.group]):
                selector = table[kind.group] == value
                _draw_pair(ax, kind, table, selector, suffix=f" ({kind.group}={value:g})")
        else:
            _draw_pair(ax, kind, table, np.ones(len(table[kind.x]), dtype=bool), suffix="")
        for marker in kind.markers:
            if marker.column:
                position = constant_value(table, marker.column, spec.csv_path)
            else:
                position = marker.position
            line = ax.axvline(position, color=marker.color, linestyle="--", label=marker.label)
            line.set_gid("vmarker")
        ax.set_xscale(kind.xscale)
        ax.set_yscale(kind.yscale)
        ax.set_xlabel(kind.xlabel)
        ax.set_ylabel(kind.ylabel)
        if spec.title:
            ax.set_title(spec.title)
        ax.legend(title=_AGG_NOTE[kind.agg])
    return fig


def artist_inventory(fig) -> dict[str, int]:
    """Count the tagged artists in a built figure (data/overlay/vmarker/band)."""
    counts = {"data": 0, "overlay": 0, "vmarker": 0, "band": 0}
    for ax in fig.axes:
        for artist in list(ax.lines) + list(ax.collections):
            gid = artist.get_gid()
            if gid in counts:
                counts[gid] += 1
    return counts


def figure_bytes(fig, fmt: str, dpi: int) -> bytes:
    """Serialize a figure to image bytes with timestamp-free metadata."""
    buffer = io.BytesIO()
    kwargs = {"metadata": _METADATA[fmt]} if fmt in _METADATA else {}
    fig.savefig(buffer, format=fmt, dpi=dpi, **kwargs)
    return buffer.getvalue()


def render(spec: FigureSpec) -> str:
    """Render ``spec`` to its output path; returns the path written.

    The figure is fully built and serialized before the output file is
    touched, so a bad CSV never leaves a partial image behind.
    """
    fmt = os.path.splitext(spec.out_path)[1].lstrip(".").lower()
    if not fmt:
        raise FigureError(f"output path {spec.out_path!r} needs an image extension")
    fig = build_figure(spec)
    try:
        payload = figure_bytes(fig, fmt, spec.dpi)
    finally:
        plt.close(fig)
    with open(spec.out_path, "wb") as fh:
        fh.write(payload)
    return spec.out_path
