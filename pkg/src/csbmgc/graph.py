"""Operations on undirected simple graphs with node features.

Adjacency matrices are symmetric 0/1 arrays with zero diagonal, stored either
as a dense ``uint8`` matrix (up to :data:`DENSE_NODE_LIMIT` nodes) or as a
``scipy.sparse`` CSR matrix above that.  Every public function accepts both
backends.

The central operation is the degree-normalized neighborhood average

    X~ = D^{-1} (A + I) X,

where ``D`` is the diagonal of row sums of ``A + I``; that is, row ``i`` of
the output is the mean feature vector over node ``i`` and its neighbors.  No
other normalization is provided.  Sums are accumulated in ascending neighbor
order; instances large enough for rounding to matter (more than
:data:`COMPENSATED_TERM_LIMIT` accumulated products) use Kahan-compensated
accumulation instead.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import scipy.sparse as sp

from .errors import ParameterError, ShapeError
from .rngs import NOISE_STREAM, child_generator

if TYPE_CHECKING:  # pragma: no cover
    from .sampling import CsbmParams, Sample

#: Largest node count stored as a dense adjacency matrix.
DENSE_NODE_LIMIT = 5000

#: Above this many accumulated products, convolution switches to compensated
#: (Kahan) summation.
COMPENSATED_TERM_LIMIT = 10_000_000


def is_sparse(adjacency) -> bool:
    return sp.issparse(adjacency)


def validate_adjacency(adjacency, n_expected: int | None = None) -> int:
    """Check square/symmetric/0-1/zero-diagonal structure; return n."""
    if is_sparse(adjacency):
        n, m = adjacency.shape
        if n != m:
            raise ShapeError(f"adjacency must be square, got {adjacency.shape}")
        csr = adjacency.tocsr()
        if csr.nnz and not np.all(csr.data == 1):
            raise ShapeError("adjacency entries must be 0 or 1")
        if csr.diagonal().any():
            raise ShapeError("adjacency diagonal must be zero")
        if (csr != csr.T).nnz != 0:
            raise ShapeError("adjacency must be symmetric")
    else:
        adjacency = np.asarray(adjacency)
        if adjacency.ndim != 2 or adjacency.shape[0] != adjacency.shape[1]:
            raise ShapeError(f"adjacency must be square, got {adjacency.shape}")
        n = adjacency.shape[0]
        if not np.all((adjacency == 0) | (adjacency == 1)):
            raise ShapeError("adjacency entries must be 0 or 1")
        if np.any(np.diagonal(adjacency)):
            raise ShapeError("adjacency diagonal must be zero")
        if not np.array_equal(adjacency, adjacency.T):
            raise ShapeError("adjacency must be symmetric")
    if n_expected is not None and n != n_expected:
        raise ShapeError(f"adjacency is {n}x{n}, expected {n_expected}x{n_expected}")
    return n


def triu_edges(adjacency) -> np.ndarray:
    """Edge list as an (m, 2) int64 array with u < v, lexicographically sorted."""
    if is_sparse(adjacency):
        coo = sp.triu(adjacency, k=1).tocoo()
        edges = np.column_stack([coo.row, coo.col]).astype(np.int64)
    else:
        u, v = np.nonzero(np.triu(np.asarray(adjacency), k=1))
        edges = np.column_stack([u, v]).astype(np.int64)
    if edges.size:
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        edges = edges[order]
    return edges


def adjacency_from_edges(n: int, edges: np.ndarray, sparse: bool | None = None):
    """Build an adjacency matrix from u < v pairs.

    The backend is dense ``uint8`` up to ``DENSE_NODE_LIMIT`` nodes and CSR
    ``int8`` above, unless ``sparse`` forces one explicitly.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if sparse is None:
        sparse = n > DENSE_NODE_LIMIT
    if not sparse:
        a = np.zeros((n, n), dtype=np.uint8)
        if edges.size:
            a[edges[:, 0], edges[:, 1]] = 1
            a[edges[:, 1], edges[:, 0]] = 1
        return a
    if edges.size:
        rows = np.concatenate([edges[:, 0], edges[:, 1]])
        cols = np.concatenate([edges[:, 1], edges[:, 0]])
        data = np.ones(len(rows), dtype=np.int8)
    else:
        rows = cols = np.empty(0, dtype=np.int64)
        data = np.empty(0, dtype=np.int8)
    a = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()
    a.sort_indices()
    return a


def adjacency_digest(adjacency) -> str:
    """Short stable digest of the graph structure (node count + edge list)."""
    edges = triu_edges(adjacency)
    h = hashlib.blake2b(digest_size=16)
    h.update(str(adjacency.shape[0]).encode())
    h.update(np.ascontiguousarray(edges).tobytes())
    return h.hexdigest()


def degrees_with_self(adjacency) -> np.ndarray:
    """Row sums of A + I as float64 (the normalizer of the convolution)."""
    if is_sparse(adjacency):
        deg = np.asarray(adjacency.sum(axis=1)).ravel().astype(np.float64)
    else:
        deg = np.asarray(adjacency).sum(axis=1, dtype=np.float64)
    return deg + 1.0


@dataclass(frozen=True)
class ConvolvedFeatures:
    """Neighborhood-averaged features plus a digest of the graph they used."""

    values: np.ndarray
    graph_digest: str


def _neighbor_sums_compensated(csr: sp.csr_matrix, features: np.ndarray) -> np.ndarray:
    """Kahan-compensated sum of X over {i} ∪ N(i), self term first."""
    total = features.astype(np.float64).copy()
    comp = np.zeros_like(total)
    indptr, indices = csr.indptr, csr.indices
    deg = np.diff(indptr)
    for k in range(int(deg.max(initial=0))):
        rows = np.nonzero(deg > k)[0]
        nbrs = indices[indptr[rows] + k]
        y = features[nbrs] - comp[rows]
        t = total[rows] + y
        comp[rows] = (t - total[rows]) - y
        total[rows] = t
    return total


def convolve(adjacency, features: np.ndarray) -> ConvolvedFeatures:
    """Degree-normalized neighborhood average D^{-1}(A + I)X.

    Parameters
    ----------
    adjacency:
        Symmetric 0/1 matrix with zero diagonal (dense or CSR).
    features:
        Float matrix with one row per node.

    Returns
    -------
    ConvolvedFeatures
        Averaged features (same shape) and a digest of the source graph.
    """
    n = validate_adjacency(adjacency)
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] != n:
        raise ShapeError(
            f"features must have one row per node: got {features.shape}, n={n}"
        )
    csr = adjacency.tocsr() if is_sparse(adjacency) else sp.csr_matrix(
        np.asarray(adjacency, dtype=np.float64)
    )
    csr.sort_indices()
    terms = (csr.nnz + n) * features.shape[1]
    if terms > COMPENSATED_TERM_LIMIT:
        sums = _neighbor_sums_compensated(csr, features)
    else:
        sums = csr.astype(np.float64) @ features + features
    values = sums / degrees_with_self(adjacency)[:, None]
    return ConvolvedFeatures(values, adjacency_digest(adjacency))


def neighborhood_class_counts(adjacency, labels: np.ndarray) -> np.ndarray:
    """Count members of each binary class in N(i) ∪ {i}, per node.

    Returns an (n, 2) float64 array; column c is ``|C_c ∩ N_i|`` with the
    closed neighborhood (node i itself included).
    """
    n = validate_adjacency(adjacency)
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ShapeError(f"labels must have shape ({n},), got {labels.shape}")
    ind = np.column_stack([(labels == 0), (labels == 1)]).astype(np.float64)
    if is_sparse(adjacency):
        counts = adjacency.tocsr().astype(np.float64) @ ind
    else:
        counts = sp.csr_matrix(np.asarray(adjacency, dtype=np.float64)) @ ind
    return counts + ind


@dataclass(frozen=True)
class ConditionalMeans:
    """Expected convolved features given the graph, and their dense limits."""

    values: np.ndarray        # (n, d): per-node conditional mean of X~ given A, labels
    limit_class0: np.ndarray  # (d,): (p mu + q nu) / (p + q)
    limit_class1: np.ndarray  # (d,): (q mu + p nu) / (p + q)


def conditional_means(params: "CsbmParams", sample: "Sample") -> ConditionalMeans:
    """Per-node mean of the convolved features, conditional on the graph.

    Row i is ``(|C0 ∩ N_i| mu + |C1 ∩ N_i| nu) / D_ii`` with closed
    neighborhoods; the limits are the idealized mixtures these rows
    concentrate around for each class.
    """
    if params.p + params.q <= 0:
        raise ParameterError("conditional-mean limits require p + q > 0")
    counts = neighborhood_class_counts(sample.adjacency, sample.labels)
    deg = degrees_with_self(sample.adjacency)
    mu = np.asarray(params.mu, dtype=np.float64)
    nu = np.asarray(params.nu, dtype=np.float64)
    values = (counts[:, :1] * mu + counts[:, 1:] * nu) / deg[:, None]
    s = params.p + params.q
    return ConditionalMeans(
        values=values,
        limit_class0=(params.p * mu + params.q * nu) / s,
        limit_class1=(params.q * mu + params.p * nu) / s,
    )


@dataclass(frozen=True)
class NoiseInjection:
    """Result of adding random inter-class edges to a graph."""

    adjacency: object
    requested_rho: float
    achieved_rho: float
    edges_added: int
    inter_class_edges_before: int
    absent_pairs_before: int


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def inject_inter_class_noise(adjacency, labels: np.ndarray, rho: float, seed: int) -> NoiseInjection:
    """Add ``round(rho * m_inter)`` new inter-class edges uniformly at random.

    ``m_inter`` is the number of existing inter-class edges.  New edges are
    drawn uniformly without replacement from the currently absent inter-class
    pairs; if fewer absent pairs exist than requested, every absent pair is
    added and the achieved ratio is reported.  Features and labels are never
    touched.

    Uses rejection sampling while absent pairs make up more than 10% of all
    inter-class pairs, and explicit enumeration of the absent pairs otherwise.
    """
    n = validate_adjacency(adjacency)
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ShapeError(f"labels must have shape ({n},), got {labels.shape}")
    if not np.all((labels == 0) | (labels == 1)):
        raise ParameterError("noise injection requires binary 0/1 labels")
    if not np.isfinite(rho) or rho < 0:
        raise ParameterError(f"rho must be a finite non-negative number, got {rho}")

    idx0 = np.nonzero(labels == 0)[0]
    idx1 = np.nonzero(labels == 1)[0]
    total_pairs = len(idx0) * len(idx1)
    edges = triu_edges(adjacency)
    if edges.size:
        inter = labels[edges[:, 0]] != labels[edges[:, 1]]
        m_inter = int(inter.sum())
    else:
        m_inter = 0
    absent = total_pairs - m_inter
    k = min(_round_half_up(rho * m_inter), absent)

    if k <= 0:
        new_edges = np.empty((0, 2), dtype=np.int64)
    else:
        rng = child_generator(seed, NOISE_STREAM)
        existing = {int(u) * n + int(v) for u, v in edges[labels[edges[:, 0]] != labels[edges[:, 1]]]} if edges.size else set()
        if absent > 0.1 * total_pairs:
            new_edges = _sample_absent_by_rejection(rng, idx0, idx1, existing, n, k)
        else:
            new_edges = _sample_absent_by_enumeration(rng, adjacency, idx0, idx1, k)

    if new_edges.size:
        if is_sparse(adjacency):
            combined = np.vstack([edges, new_edges])
            noisy = adjacency_from_edges(n, combined, sparse=True)
        else:
            noisy = np.array(adjacency, dtype=np.uint8, copy=True)
            noisy[new_edges[:, 0], new_edges[:, 1]] = 1
            noisy[new_edges[:, 1], new_edges[:, 0]] = 1
    else:
        noisy = adjacency.copy()
    achieved = (len(new_edges) / m_inter) if m_inter else 0.0
    return NoiseInjection(
        adjacency=noisy,
        requested_rho=float(rho),
        achieved_rho=achieved,
        edges_added=int(len(new_edges)),
        inter_class_edges_before=m_inter,
        absent_pairs_before=absent,
    )


def _sample_absent_by_rejection(rng, idx0, idx1, existing: set, n: int, k: int) -> np.ndarray:
    chosen: list[tuple[int, int]] = []
    chosen_keys: set[int] = set()
    while len(chosen) < k:
        batch = max(64, 2 * (k - len(chosen)))
        ii = idx0[rng.integers(0, len(idx0), size=batch)]
        jj = idx1[rng.integers(0, len(idx1), size=batch)]
        u = np.minimum(ii, jj)
        v = np.maximum(ii, jj)
        for a, b in zip(u.tolist(), v.tolist()):
            key = a * n + b
            if key in existing or key in chosen_keys:
                continue
            chosen_keys.add(key)
            chosen.append((a, b))
            if len(chosen) == k:
                break
    return np.asarray(chosen, dtype=np.int64)


def _sample_absent_by_enumeration(rng, adjacency, idx0, idx1, k: int) -> np.ndarray:
    if is_sparse(adjacency):
        sub = np.asarray(adjacency.tocsr()[idx0][:, idx1].todense())
    else:
        sub = np.asarray(adjacency)[np.ix_(idx0, idx1)]
    free = np.argwhere(sub == 0)
    pairs = np.column_stack([idx0[free[:, 0]], idx1[free[:, 1]]])
    u = pairs.min(axis=1)
    v = pairs.max(axis=1)
    pairs = np.column_stack([u, v])
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    pairs = pairs[order]
    pick = rng.choice(len(pairs), size=k, replace=False)
    return pairs[np.sort(pick)].astype(np.int64)
