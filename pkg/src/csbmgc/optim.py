"""Norm-constrained logistic regression on a labeled node subset.

The training objective over an index set S is the binary cross-entropy

    L = -(1/|S|) sum_{i in S} [ y_i log yhat_i + (1 - y_i) log(1 - yhat_i) ],
    yhat_i = sigmoid(<x_i, w> + b),

evaluated in the overflow-free softplus form

    L = (1/|S|) sum_{i in S} softplus(z_i),     z_i = (1 - 2 y_i)(<x_i, w> + b),
    softplus(t) = max(t, 0) + log1p(exp(-|t|)).

The constrained minimum over ||w||_2 <= R (bias free) is found by projected
gradient descent from the zero initializer with the fixed step 1/L, where the
curvature bound L = lambda_max(G)/4 uses the second-moment matrix G of the
bias-augmented training features (estimated with 100 power-iteration steps).
A backtracking line search is available as a fallback step mode.  Iteration
stops when the projected-gradient mapping norm drops to ``tolerance`` or
after ``max_iterations`` steps; under the fixed step the loss trace is
non-increasing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import NumericalError, ParameterError, ShapeError


def softplus(t: np.ndarray) -> np.ndarray:
    """log(1 + exp(t)) computed without overflow."""
    t = np.asarray(t, dtype=np.float64)
    return np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))


@dataclass(frozen=True)
class Classifier:
    """An affine score <x, w> + b; class 1 is predicted on positive score."""

    w: np.ndarray
    b: float

    def logits(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(features, dtype=np.float64) @ self.w + self.b

    def predict(self, features: np.ndarray) -> np.ndarray:
        return (self.logits(features) > 0).astype(np.int8)


@dataclass(frozen=True)
class TrainConfig:
    """Solver settings.

    ``radius`` is the Euclidean bound R on the weights (the bias is free);
    ``step_mode`` is ``"fixed"`` (step 1/L) or ``"backtracking"``.
    """

    radius: float
    step_mode: str = "fixed"
    tolerance: float = 1e-9
    max_iterations: int = 200_000

    def __post_init__(self):
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise ParameterError(f"radius must be positive, got {self.radius}")
        if self.step_mode not in ("fixed", "backtracking"):
            raise ParameterError(f"unknown step_mode: {self.step_mode!r}")
        if not (np.isfinite(self.tolerance) and self.tolerance > 0):
            raise ParameterError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ParameterError("max_iterations must be at least 1")


@dataclass(frozen=True)
class LossReport:
    """Loss and error statistics of one classifier on one index set."""

    loss: float
    logits: np.ndarray
    misclassified: int
    error_rate: float
    indices: np.ndarray


def _check_inputs(features, labels, indices) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if features.ndim != 2:
        raise ShapeError(f"features must be 2-d, got shape {features.shape}")
    n = features.shape[0]
    if labels.shape != (n,):
        raise ShapeError(f"labels must have shape ({n},), got {labels.shape}")
    if not np.all((labels == 0) | (labels == 1)):
        raise ShapeError("labels must be 0/1")
    if indices is None:
        indices = np.arange(n, dtype=np.int64)
    else:
        indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        raise ParameterError("index set must be non-empty")
    if indices.min() < 0 or indices.max() >= n:
        raise ParameterError(f"index set out of range [0, {n})")
    if len(np.unique(indices)) != len(indices):
        raise ParameterError("index set contains duplicates")
    return features, labels, indices


def bce_loss(features, labels, indices, classifier: Classifier) -> LossReport:
    """Mean binary cross-entropy of ``classifier`` over ``indices``.

    ``indices=None`` means all nodes.  The zero classifier scores exactly
    log 2 regardless of the data.
    """
    features, labels, indices = _check_inputs(features, labels, indices)
    x = features[indices]
    y = labels[indices].astype(np.float64)
    z = x @ np.asarray(classifier.w, dtype=np.float64) + classifier.b
    loss = float(np.mean(softplus((1.0 - 2.0 * y) * z)))
    predictions = z > 0
    wrong = int(np.sum(predictions != (y == 1)))
    return LossReport(
        loss=loss,
        logits=z,
        misclassified=wrong,
        error_rate=wrong / len(indices),
        indices=indices,
    )


def bce_gradient(features, labels, indices, classifier: Classifier) -> tuple[np.ndarray, float]:
    """Gradient of the mean BCE at ``classifier``: (d/dw, d/db)."""
    features, labels, indices = _check_inputs(features, labels, indices)
    x = features[indices]
    y = labels[indices].astype(np.float64)
    z = x @ np.asarray(classifier.w, dtype=np.float64) + classifier.b
    residual = expit(z) - y
    grad_w = x.T @ residual / len(indices)
    grad_b = float(np.mean(residual))
    return grad_w, grad_b


def project_to_ball(w: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto the ball of the given radius."""
    if not (np.isfinite(radius) and radius > 0):
        raise ParameterError(f"radius must be positive, got {radius}")
    w = np.asarray(w, dtype=np.float64)
    norm = float(np.linalg.norm(w))
    if norm <= radius:
        return w.copy()
    return w * (radius / norm)


def _lipschitz_bound(x: np.ndarray) -> float:
    """Curvature bound lambda_max(G)/4 for G the bias-augmented second moment.

    The top eigenvalue is estimated with 100 power-iteration steps from the
    constant unit vector; G always has lambda_max >= 1 because of the
    all-ones bias column, so the bound stays away from zero.
    """
    m = x.shape[0]
    xa = np.column_stack([x, np.ones(m)])
    g = xa.T @ xa / m
    v = np.ones(g.shape[0]) / np.sqrt(g.shape[0])
    for _ in range(100):
        gv = g @ v
        norm = np.linalg.norm(gv)
        if norm == 0.0:
            break
        v = gv / norm
    return float(v @ g @ v) / 4.0


@dataclass(frozen=True)
class SolveResult:
    """Solver output: the classifier plus its full convergence trace."""

    classifier: Classifier
    trace: np.ndarray            # loss at each visited iterate (trace[0] = log 2)
    gradient_norms: np.ndarray   # projected-gradient mapping norm per step taken
    weight_norms: np.ndarray     # ||w|| at each visited iterate
    iterations: int
    converged: bool
    lipschitz_bound: float
    step_size: float
    final_loss: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "final_loss", float(self.trace[-1]))


def solve_opt(features, labels, indices, config: TrainConfig) -> SolveResult:
    """Minimize the BCE over ``||w|| <= R`` with projected gradient descent.

    Deterministic for fixed inputs: zero initialization, fixed 1/L step (or
    deterministic backtracking), no randomness.  Raises
    :class:`NumericalError` (with the iteration index) if the loss ever
    becomes non-finite.
    """
    features, labels, indices = _check_inputs(features, labels, indices)
    x = features[indices]
    y = labels[indices].astype(np.float64)
    m, d = x.shape
    sign = 1.0 - 2.0 * y

    lipschitz = _lipschitz_bound(x)
    base_step = 1.0 / lipschitz

    w = np.zeros(d)
    b = 0.0
    z = np.zeros(m)

    def loss_of(z_val: np.ndarray) -> float:
        return float(np.mean(softplus(sign * z_val)))

    losses = [loss_of(z)]
    map_norms: list[float] = []
    w_norms = [0.0]
    if not np.isfinite(losses[0]):
        raise NumericalError("non-finite loss at initialization", iteration=0)

    converged = False
    iterations = 0
    for t in range(config.max_iterations):
        residual = expit(z) - y
        grad_w = x.T @ residual / m
        grad_b = float(np.mean(residual))

        step = base_step
        while True:
            w_next = project_to_ball(w - step * grad_w, config.radius)
            b_next = b - step * grad_b
            z_next = x @ w_next + b_next
            next_loss = loss_of(z_next)
            if config.step_mode == "fixed":
                break
            # Backtracking: halve until the quadratic upper model is honored.
            dw = w_next - w
            db = b_next - b
            bound = (
                losses[-1]
                + float(grad_w @ dw)
                + grad_b * db
                + (float(dw @ dw) + db * db) / (2.0 * step)
            )
            if next_loss <= bound + 1e-15 or step < 1e-18:
                break
            step *= 0.5

        if not np.isfinite(next_loss):
            raise NumericalError("non-finite loss during descent", iteration=t + 1)

        mapping = np.sqrt(
            float(np.sum(((w - w_next) / step) ** 2)) + ((b - b_next) / step) ** 2
        )
        w, b, z = w_next, b_next, z_next
        losses.append(next_loss)
        map_norms.append(mapping)
        w_norms.append(float(np.linalg.norm(w)))
        iterations = t + 1
        if mapping <= config.tolerance:
            converged = True
            break

    return SolveResult(
        classifier=Classifier(w=w, b=b),
        trace=np.asarray(losses),
        gradient_norms=np.asarray(map_norms),
        weight_norms=np.asarray(w_norms),
        iterations=iterations,
        converged=converged,
        lipschitz_bound=lipschitz,
        step_size=base_step,
    )
