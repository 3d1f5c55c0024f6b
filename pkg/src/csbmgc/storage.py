"""On-disk graph-dataset directory format.

A dataset directory holds five UTF-8 text files with ``\\n`` line endings:

``labels.txt``
    One small non-negative integer label per node, one per line.
``edges.tsv``
    One undirected edge per line as ``u<TAB>v`` with ``u < v``, 0-indexed.
``features.csv``
    One row per node of comma-separated feature values at full precision
    (Python ``repr`` of a double, which round-trips exactly).
``mask.txt``
    Sorted node indices of the labeled subset, one per line (may be empty).
``meta.json``
    Model parameters and the seed, as JSON with sorted keys.

Writers always emit the canonical form (edges sorted with ``u < v``, mask
sorted ascending), so write -> read -> write is byte-identical.  Readers are
tolerant where the format documents tolerance: reversed edge endpoints are
normalized, self-loops are dropped, and duplicate edges are de-duplicated,
with counts of both reported to the caller.  Every parse failure raises
:class:`~csbmgc.errors.DataError` naming the offending file and line.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import DataError

LABELS_FILE = "labels.txt"
EDGES_FILE = "edges.tsv"
FEATURES_FILE = "features.csv"
MASK_FILE = "mask.txt"
META_FILE = "meta.json"


def _read_lines(path: str) -> list[str]:
    if not os.path.isfile(path):
        raise DataError(f"{path}: file not found")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        text = fh.read()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def read_labels(path: str) -> np.ndarray:
    """Read one integer label per line; labels must be non-negative."""
    out = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        try:
            value = int(line.strip())
        except ValueError:
            raise DataError(f"{path}:{lineno}: not an integer label: {line!r}") from None
        if value < 0:
            raise DataError(f"{path}:{lineno}: negative label {value}")
        out.append(value)
    return np.asarray(out, dtype=np.int64)


def write_labels(path: str, labels: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(f"{int(v)}\n" for v in labels)


@dataclass(frozen=True)
class EdgeReadReport:
    """Edges plus counts of the repairs applied while reading."""

    edges: np.ndarray  # (m, 2) int64 with u < v, unique, lexicographically sorted
    self_loops_dropped: int
    duplicates_dropped: int


def read_edges(path: str, n: int) -> EdgeReadReport:
    """Read an edge list, normalizing to unique ``u < v`` pairs.

    Endpoints must be integers in ``[0, n)``.  Self-loops are dropped and
    duplicates (after orienting each pair as ``u < v``) are merged; both
    counts are reported.
    """
    pairs = []
    self_loops = 0
    for lineno, line in enumerate(_read_lines(path), start=1):
        fields = line.split("\t")
        if len(fields) != 2:
            raise DataError(f"{path}:{lineno}: expected 'u<TAB>v', got {line!r}")
        try:
            u, v = int(fields[0]), int(fields[1])
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-integer endpoint in {line!r}") from None
        if not (0 <= u < n and 0 <= v < n):
            raise DataError(f"{path}:{lineno}: endpoint out of range [0, {n}): {line!r}")
        if u == v:
            self_loops += 1
            continue
        pairs.append((u, v) if u < v else (v, u))
    if pairs:
        arr = np.asarray(pairs, dtype=np.int64)
        unique = np.unique(arr, axis=0)
        duplicates = len(arr) - len(unique)
    else:
        unique = np.empty((0, 2), dtype=np.int64)
        duplicates = 0
    return EdgeReadReport(unique, self_loops, duplicates)


def write_edges(path: str, edges: np.ndarray) -> None:
    """Write edges canonically: each as ``u<TAB>v`` with u < v, sorted."""
    edges = np.asarray(edges, dtype=np.int64)
    if edges.size:
        lo = edges.min(axis=1)
        hi = edges.max(axis=1)
        canon = np.unique(np.column_stack([lo, hi]), axis=0)
    else:
        canon = np.empty((0, 2), dtype=np.int64)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(f"{u}\t{v}\n" for u, v in canon)


def read_features(path: str) -> np.ndarray:
    """Read a dense float matrix; all rows must have the same width."""
    rows = []
    width = None
    for lineno, line in enumerate(_read_lines(path), start=1):
        fields = line.split(",")
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise DataError(
                f"{path}:{lineno}: ragged row ({len(fields)} values, expected {width})"
            )
        try:
            rows.append([float(f) for f in fields])
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-numeric feature value") from None
    if not rows:
        raise DataError(f"{path}: no feature rows")
    return np.asarray(rows, dtype=np.float64)


def write_features(path: str, features: np.ndarray) -> None:
    features = np.asarray(features, dtype=np.float64)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in features:
            fh.write(",".join(repr(float(x)) for x in row))
            fh.write("\n")


def read_mask(path: str, n: int) -> np.ndarray:
    """Read labeled-node indices; must be unique and in ``[0, n)``."""
    out = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        try:
            idx = int(line.strip())
        except ValueError:
            raise DataError(f"{path}:{lineno}: not an integer index: {line!r}") from None
        if not 0 <= idx < n:
            raise DataError(f"{path}:{lineno}: index out of range [0, {n}): {idx}")
        out.append(idx)
    arr = np.asarray(sorted(out), dtype=np.int64)
    if len(np.unique(arr)) != len(arr):
        raise DataError(f"{path}: duplicate indices in mask")
    return arr


def write_mask(path: str, mask: np.ndarray | None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if mask is not None:
            fh.writelines(f"{int(i)}\n" for i in sorted(int(i) for i in mask))


def read_meta(path: str) -> dict:
    if not os.path.isfile(path):
        raise DataError(f"{path}: file not found")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None


def write_meta(path: str, meta: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
