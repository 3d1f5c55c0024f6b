"""Linear-separability certificates.

A labeled point set is linearly separable when some hyperplane puts every
class-1 point strictly on its positive side and every class-0 point strictly
on the negative side.  :func:`certify_separability` decides this exactly (up
to a documented margin threshold) by solving the box-normalized LP

    maximize  delta
    s.t.      s_i (<v, x_i> + b) >= delta      for every certified point i,
              -1 <= v_j <= 1,  -B <= b <= B,   s_i = 2 y_i - 1,

with B = 1 + d * max_i ||x_i||_inf, which is loose enough that the bias box
never binds.  The reported margin is the LP optimum — an infinity-norm
normalized margin, not a Euclidean one — and the verdict is "separable" when
it exceeds 1e-8 (comfortably above simplex pivot noise) and the recovered
witness re-checks strictly.  The zero solution is always feasible, so the
optimum is never negative and non-separable inputs (duplicate points with
conflicting labels, say) come back with margin 0 rather than an error.

:func:`brute_force_separability` is an independent oracle for tiny inputs
(d in {1, 2}, at most 14 points) that enumerates candidate separators
directly; it exists so the LP route can be checked against something that
cannot share its bugs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import simplex
from .errors import ParameterError, ShapeError, SimplexError

#: LP margins above this count as separable; below, as not.
MARGIN_THRESHOLD = 1e-8

#: Witness slack: a certified witness must score at least margin - this.
WITNESS_SLACK = 1e-9


def _restrict(features, labels, indices):
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if features.ndim != 2:
        raise ShapeError(f"features must be 2-d, got {features.shape}")
    if labels.shape != (features.shape[0],):
        raise ShapeError(
            f"labels must have shape ({features.shape[0]},), got {labels.shape}"
        )
    if not np.all((labels == 0) | (labels == 1)):
        raise ShapeError("labels must be 0/1")
    if indices is None:
        indices = np.arange(features.shape[0], dtype=np.int64)
    else:
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size == 0:
            raise ParameterError("index set must be non-empty")
        if indices.min() < 0 or indices.max() >= features.shape[0]:
            raise ParameterError(f"index set out of range [0, {features.shape[0]})")
    return features[indices], labels[indices], indices


@dataclass(frozen=True)
class SeparabilityCertificate:
    """LP verdict plus the witness hyperplane and margin that back it."""

    separable: bool
    margin: float
    witness_v: np.ndarray
    witness_b: float
    lp_status: str
    indices: np.ndarray


def certify_separability(features, labels, indices=None) -> SeparabilityCertificate:
    """Decide strict linear separability of ``features[indices]``.

    ``indices=None`` certifies every point.  See the module docstring for the
    LP; ``lp_status`` is "optimal" normally and "degenerate" in the (never
    observed) case where the margin clears the threshold but the recovered
    witness fails its strict re-check, in which case the verdict is demoted
    to not-separable.
    """
    x, y, indices = _restrict(features, labels, indices)
    m, d = x.shape
    s = 2.0 * y.astype(np.float64) - 1.0
    box = 1.0 + d * float(np.max(np.abs(x))) if x.size else 1.0

    # Shift to non-negative variables: v' = v + 1 in [0, 2], b' = b + B in
    # [0, 2B], delta >= 0 (the optimum is never negative).  Columns:
    # v' (d) | b' | delta.
    nvar = d + 2
    n_rows = m + d + 1
    a = np.zeros((n_rows, nvar))
    rhs = np.zeros(n_rows)
    a[:m, :d] = -s[:, None] * x
    a[:m, d] = -s
    a[:m, d + 1] = 1.0
    rhs[:m] = -s * (x.sum(axis=1) + box)
    a[m:m + d, :d] = np.eye(d)
    rhs[m:m + d] = 2.0
    a[m + d, d] = 1.0
    rhs[m + d] = 2.0 * box

    cost = np.zeros(nvar)
    cost[d + 1] = -1.0
    result = simplex.solve(cost, a, rhs)
    if result.status != simplex.OPTIMAL:
        raise SimplexError(f"separability LP ended {result.status}")

    v = result.x[:d] - 1.0
    b = float(result.x[d] - box)
    # The margin variable is constrained non-negative; basis readout can carry
    # ~1e-16 of pivot dust below zero, which we clip.
    margin = max(0.0, float(result.x[d + 1]))

    separable = margin > MARGIN_THRESHOLD
    status = "optimal"
    if separable:
        scores = s * (x @ v + b)
        if not np.all(scores >= margin - WITNESS_SLACK):
            separable = False
            status = "degenerate"
    return SeparabilityCertificate(
        separable=separable,
        margin=margin,
        witness_v=v,
        witness_b=b,
        lp_status=status,
        indices=indices,
    )


def _strictly_separates(x, s, v, b) -> bool:
    scores = s * (x @ v + b)
    return bool(np.all(scores > 0.0))


def brute_force_separability(features, labels, indices=None) -> bool:
    """Exhaustive separability oracle for d in {1, 2} and at most 14 points.

    In one dimension the classes separate iff their projections do not
    overlap.  In two dimensions, candidate separators are built from every
    point pair: normals perpendicular and parallel to the pair direction,
    each rotated by 0 and +/-1e-6 radians, with offsets passing through each
    endpoint and the midpoint, nudged by +/-1e-6 (scaled).  Every candidate
    is tested in both orientations for strict separation, so extra candidates
    can never produce a false positive.
    """
    x, y, _ = _restrict(features, labels, indices)
    m, d = x.shape
    if d not in (1, 2):
        raise ParameterError(f"brute force supports d in {{1, 2}}, got d={d}")
    if m > 14:
        raise ParameterError(f"brute force supports at most 14 points, got {m}")

    x0 = x[y == 0]
    x1 = x[y == 1]
    if len(x0) == 0 or len(x1) == 0:
        return True

    if d == 1:
        return bool(x0.max() < x1.min() or x1.max() < x0.min())

    s = 2.0 * y.astype(np.float64) - 1.0
    span = float(np.ptp(x)) if x.size else 1.0
    eps = 1e-6 * max(1.0, span)

    def rotations(vec):
        for angle in (-1e-6, 0.0, 1e-6):
            ca, sa = np.cos(angle), np.sin(angle)
            yield np.array([ca * vec[0] - sa * vec[1], sa * vec[0] + ca * vec[1]])

    for i in range(m):
        for j in range(i + 1, m):
            u = x[j] - x[i]
            norm = np.linalg.norm(u)
            if norm < 1e-15:
                continue
            u = u / norm
            perp = np.array([-u[1], u[0]])
            for base in (perp, u):
                for v in rotations(base):
                    t_i = float(v @ x[i])
                    t_j = float(v @ x[j])
                    for center in (t_i, t_j, 0.5 * (t_i + t_j)):
                        for nudge in (-eps, 0.0, eps):
                            b = -(center + nudge)
                            if _strictly_separates(x, s, v, b):
                                return True
                            if _strictly_separates(x, -s, v, b):
                                return True
    return False
