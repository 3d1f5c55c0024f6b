"""Loading external graph datasets and deriving binary tasks from them.

A dataset directory uses the same on-disk format as serialized model samples
(:mod:`csbmgc.storage`), except that ``labels.txt`` may hold any small
non-negative integer class ids and ``meta.json`` is free-form.  Loading is
tolerant in the two documented ways — self-loops are dropped and duplicate
edges merged, with counts kept on the loaded object — and every other flaw
raises :class:`~csbmgc.errors.DataError` naming the file and line.

Binary one-vs-all views relabel one class as 1 and the rest as 0, keep the
dataset's labeled-node mask, and report the per-class labeled fractions
beta_c = |S ∩ C_c| / n.  Class means are estimated from the labeled nodes
only, so downstream rate formulas can be evaluated on real data.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import storage
from .errors import DataError, EstimationError, ParameterError
from .graph import adjacency_from_edges


@dataclass(frozen=True)
class GraphDataset:
    """An ingested dataset: graph, features, integer labels, labeled mask."""

    features: np.ndarray
    labels: np.ndarray
    adjacency: object
    mask: np.ndarray
    meta: dict
    self_loops_dropped: int
    duplicate_edges_dropped: int
    path: str

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0


def load_dataset(path: str) -> GraphDataset:
    """Load a dataset directory, validating cross-file consistency."""
    if not os.path.isdir(path):
        raise DataError(f"{path}: not a directory")
    labels = storage.read_labels(os.path.join(path, storage.LABELS_FILE))
    n = len(labels)
    if n == 0:
        raise DataError(f"{os.path.join(path, storage.LABELS_FILE)}: no rows")
    features = storage.read_features(os.path.join(path, storage.FEATURES_FILE))
    if features.shape[0] != n:
        raise DataError(
            f"{os.path.join(path, storage.FEATURES_FILE)}: "
            f"{features.shape[0]} rows but labels.txt has {n}"
        )
    report = storage.read_edges(os.path.join(path, storage.EDGES_FILE), n)
    mask_path = os.path.join(path, storage.MASK_FILE)
    mask = storage.read_mask(mask_path, n) if os.path.isfile(mask_path) else np.empty(0, np.int64)
    meta_path = os.path.join(path, storage.META_FILE)
    meta = storage.read_meta(meta_path) if os.path.isfile(meta_path) else {}
    features.setflags(write=False)
    labels.setflags(write=False)
    mask.setflags(write=False)
    return GraphDataset(
        features=features,
        labels=labels,
        adjacency=adjacency_from_edges(n, report.edges),
        mask=mask,
        meta=meta,
        self_loops_dropped=report.self_loops_dropped,
        duplicate_edges_dropped=report.duplicates_dropped,
        path=path,
    )


@dataclass(frozen=True)
class BinaryTask:
    """A one-vs-all view of a dataset: 0/1 labels plus labeled fractions."""

    features: np.ndarray
    labels: np.ndarray  # 1 on the chosen class, 0 elsewhere
    adjacency: object
    mask: np.ndarray
    class_id: int
    beta0: float        # |S ∩ {label 0}| / n
    beta1: float        # |S ∩ {label 1}| / n

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def d(self) -> int:
        return self.features.shape[1]


def one_vs_all(dataset: GraphDataset, class_id: int) -> BinaryTask:
    """Relabel ``class_id`` as 1 and everything else as 0."""
    present = np.unique(dataset.labels)
    if class_id not in present:
        raise ParameterError(
            f"class {class_id} not present in dataset (classes: {present.tolist()})"
        )
    labels = (dataset.labels == class_id).astype(np.int8)
    n = dataset.n
    masked = labels[dataset.mask] if dataset.mask.size else np.empty(0, np.int8)
    labels.setflags(write=False)
    return BinaryTask(
        features=dataset.features,
        labels=labels,
        adjacency=dataset.adjacency,
        mask=dataset.mask,
        class_id=int(class_id),
        beta0=float(np.sum(masked == 0)) / n,
        beta1=float(np.sum(masked == 1)) / n,
    )


@dataclass(frozen=True)
class ClassMeanEstimate:
    """Labeled-node class means and their separation."""

    mean0: np.ndarray
    mean1: np.ndarray
    distance: float


def estimate_class_means(task: BinaryTask) -> ClassMeanEstimate:
    """Average the labeled features of each class of a binary task."""
    if task.mask.size == 0:
        raise EstimationError("cannot estimate class means: empty mask")
    masked_labels = task.labels[task.mask]
    out = []
    for cls in (0, 1):
        rows = task.mask[masked_labels == cls]
        if rows.size == 0:
            raise EstimationError(f"cannot estimate class means: no labeled class-{cls} nodes")
        out.append(task.features[rows].mean(axis=0))
    mean0, mean1 = out
    return ClassMeanEstimate(
        mean0=mean0, mean1=mean1, distance=float(np.linalg.norm(mean1 - mean0))
    )
