"""Sampling from the two-class contextual stochastic block model.

A draw proceeds in three independent stages, each on its own child stream of
the caller's seed (see :mod:`csbmgc.rngs`):

1. labels: n i.i.d. Bernoulli(1/2) class assignments;
2. edges: each unordered pair {i, j} is connected independently with
   probability p when the endpoints share a class and q otherwise (no
   self-loops, symmetric);
3. features: node i draws N(mu, s/d I) when its label is 0 and N(nu, s/d I)
   when it is 1, with s the feature variance scale (default 1).

Because the streams are independent, regenerating one component (say edges
with a different q) never perturbs the others for the same seed, and two
samples with identical parameters and seed are bit-for-bit identical across
platforms.

Label masks are drawn separately: a uniformly random subset of each class,
of size round(beta_c * n) (round half up), from a mask stream keyed by its
own seed.

Samples serialize to the dataset directory format of :mod:`csbmgc.storage`.
"""

from __future__ import annotations

import dataclasses
import os
import warnings
from dataclasses import dataclass

import numpy as np

from . import storage
from .errors import DataError, MaskError, ParameterError
from .graph import (
    DENSE_NODE_LIMIT,
    adjacency_from_edges,
    degrees_with_self,
    neighborhood_class_counts,
    triu_edges,
)
from .rngs import (
    EDGE_STREAM,
    FEATURE_STREAM,
    LABEL_STREAM,
    MASK_STREAM,
    child_generator,
    standard_normal,
)


def round_half_up(x: float) -> int:
    """Round to the nearest integer, halves away from zero toward +inf."""
    return int(np.floor(x + 0.5))


@dataclass(frozen=True)
class CsbmParams:
    """Parameters of the two-class contextual stochastic block model.

    Attributes
    ----------
    n, d:
        Number of nodes and feature dimension.
    p, q:
        Intra-/inter-class edge probabilities, each in [0, 1].
    mu, nu:
        Class mean vectors of shape (d,).  The model analysis assumes
        ``||mu||, ||nu|| <= 1``; larger norms are admitted with a warning.
    feature_variance_scale:
        Multiplier s on the per-coordinate feature variance s/d.
    """

    n: int
    d: int
    p: float
    q: float
    mu: np.ndarray
    nu: np.ndarray
    feature_variance_scale: float = 1.0

    def __post_init__(self):
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise ParameterError(f"n must be a positive integer, got {self.n}")
        if not (isinstance(self.d, (int, np.integer)) and self.d >= 1):
            raise ParameterError(f"d must be a positive integer, got {self.d}")
        for name, value in (("p", self.p), ("q", self.q)):
            if not (np.isfinite(value) and 0.0 <= value <= 1.0):
                raise ParameterError(f"{name} must lie in [0, 1], got {value}")
        mu = np.asarray(self.mu, dtype=np.float64)
        nu = np.asarray(self.nu, dtype=np.float64)
        if mu.shape != (self.d,) or nu.shape != (self.d,):
            raise ParameterError(
                f"mu and nu must have shape ({self.d},), got {mu.shape} and {nu.shape}"
            )
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(nu))):
            raise ParameterError("mu and nu must be finite")
        if not (np.isfinite(self.feature_variance_scale) and self.feature_variance_scale > 0):
            raise ParameterError(
                f"feature_variance_scale must be positive, got {self.feature_variance_scale}"
            )
        mu.setflags(write=False)
        nu.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "nu", nu)
        for name, vec in (("mu", mu), ("nu", nu)):
            norm = float(np.linalg.norm(vec))
            if norm > 1.0 + 1e-12:
                warnings.warn(
                    f"||{name}|| = {norm:.6g} exceeds 1; rates assume unit-ball means",
                    UserWarning,
                    stacklevel=3,
                )

    def to_dict(self) -> dict:
        return {
            "n": int(self.n),
            "d": int(self.d),
            "p": float(self.p),
            "q": float(self.q),
            "mu": [float(x) for x in self.mu],
            "nu": [float(x) for x in self.nu],
            "feature_variance_scale": float(self.feature_variance_scale),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CsbmParams":
        try:
            return cls(
                n=int(data["n"]),
                d=int(data["d"]),
                p=float(data["p"]),
                q=float(data["q"]),
                mu=np.asarray(data["mu"], dtype=np.float64),
                nu=np.asarray(data["nu"], dtype=np.float64),
                feature_variance_scale=float(data.get("feature_variance_scale", 1.0)),
            )
        except KeyError as exc:
            raise ParameterError(f"missing model parameter: {exc.args[0]}") from None


def place_means(distance: float, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Canonical mean placement at the requested separation.

    Puts the class means at -(distance/2) e1 and +(distance/2) e1, the
    convention used throughout the experiment harness.
    """
    if not (np.isfinite(distance) and distance >= 0):
        raise ParameterError(f"distance must be non-negative, got {distance}")
    mu = np.zeros(d)
    nu = np.zeros(d)
    mu[0] = -distance / 2.0
    nu[0] = +distance / 2.0
    return mu, nu


@dataclass(frozen=True)
class Sample:
    """One model draw: labels, graph, features, and (optionally) a label mask."""

    labels: np.ndarray
    adjacency: object
    features: np.ndarray
    mask: np.ndarray | None
    seed: int
    mask_seed: int | None = None

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def d(self) -> int:
        return self.features.shape[1]


def sample_csbm(params: CsbmParams, seed: int) -> Sample:
    """Draw one sample of the model.

    Deterministic: identical (params, seed) give bit-identical samples.  The
    adjacency is a dense uint8 matrix for n <= 5000 and a CSR matrix above.
    """
    n, d = params.n, params.d

    labels = child_generator(seed, LABEL_STREAM).integers(0, 2, size=n).astype(np.int8)

    rng_edges = child_generator(seed, EDGE_STREAM)
    dense = n <= DENSE_NODE_LIMIT
    if dense:
        adj = np.zeros((n, n), dtype=np.uint8)
    else:
        edge_rows: list[np.ndarray] = []
        edge_cols: list[np.ndarray] = []
    for i in range(n - 1):
        u = rng_edges.random(n - 1 - i)
        threshold = np.where(labels[i + 1:] == labels[i], params.p, params.q)
        hits = u < threshold
        if dense:
            adj[i, i + 1:] = hits
            adj[i + 1:, i] = hits
        else:
            cols = i + 1 + np.nonzero(hits)[0]
            edge_rows.append(np.full(len(cols), i, dtype=np.int64))
            edge_cols.append(cols.astype(np.int64))
    if not dense:
        if edge_rows:
            edges = np.column_stack([np.concatenate(edge_rows), np.concatenate(edge_cols)])
        else:
            edges = np.empty((0, 2), dtype=np.int64)
        adj = adjacency_from_edges(n, edges)

    scale = np.sqrt(params.feature_variance_scale / d)
    noise = standard_normal(child_generator(seed, FEATURE_STREAM), (n, d))
    means = np.where((labels == 0)[:, None], params.mu, params.nu)
    features = means + scale * noise

    labels.setflags(write=False)
    features.setflags(write=False)
    if dense:
        adj.setflags(write=False)
    return Sample(labels=labels, adjacency=adj, features=features, mask=None, seed=int(seed))


def sample_mask(
    sample: Sample,
    beta0: float,
    beta1: float,
    seed: int,
    clamp_to_class_size: bool = False,
) -> Sample:
    """Attach a label mask: round(beta_c * n) uniform nodes from each class.

    With ``clamp_to_class_size`` the per-class request is capped at the class
    size (useful at beta = 1/2, where random class imbalance would otherwise
    make the request unsatisfiable); without it, an oversized request raises
    :class:`MaskError`.
    """
    for name, beta in (("beta0", beta0), ("beta1", beta1)):
        if not (np.isfinite(beta) and 0.0 < beta <= 0.5):
            raise ParameterError(f"{name} must lie in (0, 1/2], got {beta}")
    n = sample.n
    rng = child_generator(seed, MASK_STREAM)
    picks = []
    for beta, cls in ((beta0, 0), (beta1, 1)):
        members = np.nonzero(sample.labels == cls)[0]
        want = round_half_up(beta * n)
        if want > len(members):
            if clamp_to_class_size:
                want = len(members)
            else:
                raise MaskError(
                    f"requested {want} labeled nodes from class {cls} "
                    f"but it has only {len(members)}"
                )
        picks.append(rng.permutation(members)[:want])
    mask = np.sort(np.concatenate(picks)).astype(np.int64)
    mask.setflags(write=False)
    return dataclasses.replace(sample, mask=mask, mask_seed=int(seed))


@dataclass(frozen=True)
class ConcentrationReport:
    """How close one sample sits to its expected class/degree structure.

    ``b_holds`` is the basic event: both class sizes within n/2 (1 ± delta)
    and every degree D_ii (self included) within (n/2)(p+q)(1 ± delta').
    ``b_tilde_holds`` additionally requires every node's neighborhood class
    fractions |C_c ∩ N_i| / D_ii to lie within (1 ± delta') of their expected
    mixture p/(p+q) (own class) and q/(p+q) (other class).  Both flags are
    None unless p, q, delta and delta_prime were all supplied.
    """

    class_counts: np.ndarray
    class_fractions: np.ndarray
    degrees: np.ndarray
    neighbor_fraction_class0: np.ndarray
    neighbor_fraction_class1: np.ndarray
    b_holds: bool | None
    b_tilde_holds: bool | None


def concentration_report(
    sample: Sample,
    p: float | None = None,
    q: float | None = None,
    delta: float | None = None,
    delta_prime: float | None = None,
) -> ConcentrationReport:
    """Summarize class sizes, degrees, and neighborhood class fractions."""
    n = sample.n
    counts = np.array(
        [int(np.sum(sample.labels == 0)), int(np.sum(sample.labels == 1))], dtype=np.int64
    )
    deg = degrees_with_self(sample.adjacency)
    neigh = neighborhood_class_counts(sample.adjacency, sample.labels)
    frac0 = neigh[:, 0] / deg
    frac1 = neigh[:, 1] / deg

    b = b_tilde = None
    if all(v is not None for v in (p, q, delta, delta_prime)):
        if p + q <= 0:
            raise ParameterError("concentration bands require p + q > 0")
        half = n / 2.0
        classes_ok = bool(
            np.all(counts >= half * (1 - delta)) and np.all(counts <= half * (1 + delta))
        )
        deg_center = half * (p + q)
        degrees_ok = bool(
            np.all(deg >= deg_center * (1 - delta_prime))
            and np.all(deg <= deg_center * (1 + delta_prime))
        )
        b = classes_ok and degrees_ok
        own = p / (p + q)
        other = q / (p + q)
        is0 = sample.labels == 0
        expected0 = np.where(is0, own, other)
        expected1 = np.where(is0, other, own)
        fractions_ok = bool(
            np.all(np.abs(frac0 - expected0) <= delta_prime * expected0)
            and np.all(np.abs(frac1 - expected1) <= delta_prime * expected1)
        )
        b_tilde = b and fractions_ok
    return ConcentrationReport(
        class_counts=counts,
        class_fractions=counts / float(n),
        degrees=deg,
        neighbor_fraction_class0=frac0,
        neighbor_fraction_class1=frac1,
        b_holds=b,
        b_tilde_holds=b_tilde,
    )


def save_sample(params: CsbmParams, sample: Sample, path: str, force: bool = False) -> None:
    """Write a sample to a dataset directory (see :mod:`csbmgc.storage`)."""
    if os.path.exists(os.path.join(path, storage.LABELS_FILE)) and not force:
        raise DataError(f"{path}: dataset already exists; pass force=True to overwrite")
    os.makedirs(path, exist_ok=True)
    storage.write_labels(os.path.join(path, storage.LABELS_FILE), sample.labels)
    storage.write_edges(os.path.join(path, storage.EDGES_FILE), triu_edges(sample.adjacency))
    storage.write_features(os.path.join(path, storage.FEATURES_FILE), sample.features)
    storage.write_mask(os.path.join(path, storage.MASK_FILE), sample.mask)
    meta = params.to_dict()
    meta["seed"] = int(sample.seed)
    if sample.mask_seed is not None:
        meta["mask_seed"] = int(sample.mask_seed)
    storage.write_meta(os.path.join(path, storage.META_FILE), meta)


def load_sample(path: str) -> tuple[CsbmParams, Sample]:
    """Read a sample directory back into (params, sample).

    The adjacency backend (dense vs. sparse) is chosen by node count exactly
    as in :func:`sample_csbm`, so save -> load -> save is byte-identical.
    """
    meta = storage.read_meta(os.path.join(path, storage.META_FILE))
    params = CsbmParams.from_dict(meta)
    labels = storage.read_labels(os.path.join(path, storage.LABELS_FILE))
    if len(labels) != params.n:
        raise DataError(
            f"{path}: labels.txt has {len(labels)} rows, meta.json says n={params.n}"
        )
    if not np.all((labels == 0) | (labels == 1)):
        raise DataError(f"{path}: model samples must have 0/1 labels")
    report = storage.read_edges(os.path.join(path, storage.EDGES_FILE), params.n)
    features = storage.read_features(os.path.join(path, storage.FEATURES_FILE))
    if features.shape != (params.n, params.d):
        raise DataError(
            f"{path}: features.csv is {features.shape}, expected ({params.n}, {params.d})"
        )
    mask_path = os.path.join(path, storage.MASK_FILE)
    mask = storage.read_mask(mask_path, params.n) if os.path.isfile(mask_path) else None
    if mask is not None and mask.size == 0:
        mask = None
    adjacency = adjacency_from_edges(params.n, report.edges)
    labels8 = labels.astype(np.int8)
    labels8.setflags(write=False)
    features.setflags(write=False)
    sample = Sample(
        labels=labels8,
        adjacency=adjacency,
        features=features,
        mask=mask,
        seed=int(meta.get("seed", 0)),
        mask_seed=meta.get("mask_seed"),
    )
    return params, sample
