"""Reading experiment CSVs and collapsing trial repetitions into curves.

The experiment harness writes one row per (grid point, trial) combination;
plots need one value per grid point.  ``aggregate_series`` groups rows by the
x column and reduces each group to a center line plus a min/max band.  Losses
are averaged geometrically (they live on log-scale axes), error rates
arithmetically.
"""

from __future__ import annotations

import csv
import math

import numpy as np


class FigureError(ValueError):
    """A CSV cannot be turned into the requested figure."""


class MissingColumnError(FigureError):
    """A column the figure needs is absent from the CSV."""


def load_table(path: str) -> dict[str, np.ndarray]:
    """Read a results CSV into float columns; error if there are no rows."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise FigureError(f"{path} is empty (no header row)") from None
            rows = list(reader)
    except OSError as exc:
        raise FigureError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise FigureError(f"{path} has a header but no data rows; nothing to plot")
    table = {}
    for j, name in enumerate(header):
        try:
            table[name] = np.array([float(row[j]) for row in rows])
        except (ValueError, IndexError) as exc:
            raise FigureError(f"column {name!r} in {path} is not numeric: {exc}") from exc
    return table


def require_columns(table: dict[str, np.ndarray], names, path: str) -> None:
    for name in names:
        if name not in table:
            available = ", ".join(sorted(table))
            raise MissingColumnError(
                f"column {name!r} not found in {path} (available: {available})"
            )


def geometric_mean(values: np.ndarray) -> float:
    """Geometric mean of non-negative values; any exact zero collapses it to 0."""
    if np.any(values < 0):
        raise FigureError(
            f"geometric mean needs non-negative values, got min {values.min()!r}"
        )
    if np.any(values == 0):
        return 0.0
    return float(math.exp(np.mean(np.log(values))))


def aggregate_series(x: np.ndarray, y: np.ndarray, agg: str):
    """Collapse repeated x values: (unique xs, center, min, max) arrays.

    ``agg`` is "geomean" for losses or "mean" for error rates.
    """
    if agg not in ("geomean", "mean"):
        raise FigureError(f"unknown aggregation {agg!r} (use 'geomean' or 'mean')")
    xs = np.unique(x)
    center = np.empty_like(xs)
    lo = np.empty_like(xs)
    hi = np.empty_like(xs)
    for i, value in enumerate(xs):
        group = y[x == value]
        center[i] = geometric_mean(group) if agg == "geomean" else float(np.mean(group))
        lo[i] = group.min()
        hi[i] = group.max()
    return xs, center, lo, hi


def constant_value(table: dict[str, np.ndarray], name: str, path: str) -> float:
    """The single value a constant column carries (theory columns, references)."""
    values = np.unique(table[name])
    if values.size != 1:
        raise FigureError(
            f"column {name!r} in {path} is not constant "
            f"({values.size} distinct values); cannot place one vertical marker"
        )
    return float(values[0])
