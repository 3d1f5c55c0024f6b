"""Closed-form quantities for the model: SNR, thresholds, rates, and bounds.

Notation (two classes with means mu, nu, edge probabilities p intra / q
inter, n nodes, d feature dimensions, weight budget R):

* gamma  = ||mu - nu|| / 2, half the mean separation;
* Gamma(p, q) = (p - q) / (p + q), the graph signal-to-noise ratio;
* Delta  = n (p + q) / 2, the expected closed-neighborhood size scale.

The exponential rate exp(-R * gamma * Gamma) upper-bounds (up to constants)
the optimal training loss on convolved features once the means are separated
past log(n) / sqrt(d * Delta); below K / sqrt(d) the raw problem stays
non-separable and its optimal loss is at least
2 (beta0 ^ beta1) Phi(-(K/2)(1 + t)) log 2.  Evaluating the same trained
classifier on a graph re-drawn with densities (p', q') obeys the same rate
with Gamma(p', q').

The standard normal CDF is computed in-repo from rational approximations to
erf/erfc (Cody-style three-region scheme, double-precision accurate) rather
than imported, so its error can be pinned by tests against a high-precision
oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMeansError, ParameterError
from .optim import Classifier

# Rational approximation coefficients for erf on |x| <= 0.46875 ...
_ERF_A = (
    3.16112374387056560e00,
    1.13864154151050156e02,
    3.77485237685302021e02,
    3.20937758913846947e03,
    1.85777706184603153e-1,
)
_ERF_B = (
    2.36012909523441209e01,
    2.44024637934444173e02,
    1.28261652607737228e03,
    2.84423683343917062e03,
)
# ... erfc on 0.46875 <= x <= 4 ...
_ERF_C = (
    5.64188496988670089e-1,
    8.88314979438837594e00,
    6.61191906371416295e01,
    2.98635138197400131e02,
    8.81952221241769090e02,
    1.71204761263407058e03,
    2.05107837782607147e03,
    1.23033935479799725e03,
    2.15311535474403846e-8,
)
_ERF_D = (
    1.57449261107098347e01,
    1.17693950891312499e02,
    5.37181101862009858e02,
    1.62138957456669019e03,
    3.29079923573345963e03,
    4.36261909014324716e03,
    3.43936767414372164e03,
    1.23033935480374942e03,
)
# ... and erfc asymptotics for x > 4.
_ERF_P = (
    3.05326634961232344e-1,
    3.60344899949804439e-1,
    1.25781726111229246e-1,
    1.60837851487422766e-2,
    6.58749161529837803e-4,
    1.63153871373020978e-2,
)
_ERF_Q = (
    2.56852019228982242e00,
    1.87295284992346047e00,
    5.27905102951428412e-1,
    6.05183413124413191e-2,
    2.33520497626869185e-3,
)
_ONE_OVER_SQRT_PI = 5.6418958354775628695e-1


def _erf_small(y: np.ndarray) -> np.ndarray:
    z = y * y
    num = _ERF_A[4] * z
    den = z
    for i in range(3):
        num = (num + _ERF_A[i]) * z
        den = (den + _ERF_B[i]) * z
    return y * (num + _ERF_A[3]) / (den + _ERF_B[3])


def _erfc_mid(y: np.ndarray) -> np.ndarray:
    num = _ERF_C[8] * y
    den = y
    for i in range(7):
        num = (num + _ERF_C[i]) * y
        den = (den + _ERF_D[i]) * y
    result = (num + _ERF_C[7]) / (den + _ERF_D[7])
    ysq = np.trunc(y * 16.0) / 16.0
    delta = (y - ysq) * (y + ysq)
    return np.exp(-ysq * ysq) * np.exp(-delta) * result


def _erfc_tail(y: np.ndarray) -> np.ndarray:
    z = 1.0 / (y * y)
    num = _ERF_P[5] * z
    den = z
    for i in range(4):
        num = (num + _ERF_P[i]) * z
        den = (den + _ERF_Q[i]) * z
    result = z * (num + _ERF_P[4]) / (den + _ERF_Q[4])
    result = (_ONE_OVER_SQRT_PI - result) / y
    ysq = np.trunc(y * 16.0) / 16.0
    delta = (y - ysq) * (y + ysq)
    with np.errstate(under="ignore"):
        return np.exp(-ysq * ysq) * np.exp(-delta) * result


def _erfc_positive(y: np.ndarray) -> np.ndarray:
    """erfc on y >= 0 via the three-region rational scheme."""
    out = np.empty_like(y)
    small = y <= 0.46875
    mid = (~small) & (y <= 4.0)
    tail = y > 4.0
    if small.any():
        out[small] = 1.0 - _erf_small(y[small])
    if mid.any():
        out[mid] = _erfc_mid(y[mid])
    if tail.any():
        out[tail] = _erfc_tail(y[tail])
    return out


def normal_cdf(x):
    """Standard normal CDF Phi, double-precision accurate, array-friendly."""
    arr = np.asarray(x, dtype=np.float64)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    y = -arr / math.sqrt(2.0)  # Phi(x) = erfc(-x / sqrt 2) / 2
    sign = y < 0
    e = _erfc_positive(np.abs(y))
    out = np.where(sign, 2.0 - e, e) / 2.0
    return float(out[0]) if scalar else out


def gamma_snr(p: float, q: float) -> float:
    """Graph signal-to-noise ratio (p - q) / (p + q)."""
    for name, value in (("p", p), ("q", q)):
        if not (np.isfinite(value) and 0.0 <= value <= 1.0):
            raise ParameterError(f"{name} must lie in [0, 1], got {value}")
    if p + q == 0:
        raise ParameterError("Gamma(p, q) is undefined at p = q = 0")
    return (p - q) / (p + q)


@dataclass(frozen=True)
class SeparabilityThresholds:
    """The mean-separation scales at which the regime changes.

    ``raw_scale`` = K / sqrt(d): below this the raw features are not linearly
    separable with high probability.  ``convolved_lower`` = 1 / sqrt(d Delta)
    with Delta = n(p+q)/2: below this even convolved features stay entangled.
    ``convolved_upper`` = log(n) / sqrt(d Delta): above this the convolved
    features separate with high probability.  ``convolved_upper_unhalved``
    is the same quantity with n(p+q) unhalved under the square root; prose
    accounts of the upper threshold are ambiguous between the two forms (a
    commonly quoted numeric value of ~0.035 at n=400, d=60, p=0.5, q=0.1
    matches neither exactly), so both are exposed and plots should mark both.
    """

    raw_scale: float
    convolved_lower: float
    convolved_upper: float
    convolved_upper_unhalved: float
    mean_degree: float


def thresholds(n: int, d: int, p: float, q: float, scale_k: float = 1.0) -> SeparabilityThresholds:
    """Compute the separation thresholds for a given model size."""
    if n < 1 or d < 1:
        raise ParameterError(f"n and d must be positive, got n={n}, d={d}")
    if not (np.isfinite(scale_k) and scale_k > 0):
        raise ParameterError(f"scale_k must be positive, got {scale_k}")
    gamma_snr(p, q)  # validates p, q and p + q > 0
    delta = n * (p + q) / 2.0
    return SeparabilityThresholds(
        raw_scale=scale_k / math.sqrt(d),
        convolved_lower=1.0 / math.sqrt(d * delta),
        convolved_upper=math.log(n) / math.sqrt(d * delta),
        convolved_upper_unhalved=math.log(n) / math.sqrt(d * n * (p + q)),
        mean_degree=1.0 + (n - 1) * (p + q) / 2.0,
    )


def mean_distance(mu, nu) -> float:
    """Euclidean distance between the class means."""
    mu = np.asarray(mu, dtype=np.float64)
    nu = np.asarray(nu, dtype=np.float64)
    if mu.shape != nu.shape:
        raise ParameterError(f"mu and nu must share a shape, got {mu.shape} vs {nu.shape}")
    return float(np.linalg.norm(nu - mu))


def ansatz_classifier(mu, nu, radius: float) -> Classifier:
    """The mean-difference classifier of maximal norm.

    w = (R / (2 gamma)) (nu - mu) — i.e. R times the unit mean-difference
    direction, so ||w|| = R exactly — with the bias placing the boundary at
    the midpoint of the means: b = -<(mu + nu)/2, w>.
    """
    if not (np.isfinite(radius) and radius > 0):
        raise ParameterError(f"radius must be positive, got {radius}")
    mu = np.asarray(mu, dtype=np.float64)
    nu = np.asarray(nu, dtype=np.float64)
    distance = mean_distance(mu, nu)
    if distance == 0.0:
        raise DegenerateMeansError("mu and nu coincide; no mean-difference direction")
    w = (radius / distance) * (nu - mu)
    b = -float((mu + nu) @ w) / 2.0
    return Classifier(w=w, b=b)


def rate_from_distance(radius: float, distance: float, p: float, q: float) -> float:
    """exp(-R * (distance/2) * Gamma(p, q)), the exponential loss scale."""
    if not (np.isfinite(radius) and radius > 0):
        raise ParameterError(f"radius must be positive, got {radius}")
    if not (np.isfinite(distance) and distance >= 0):
        raise ParameterError(f"distance must be non-negative, got {distance}")
    return math.exp(-radius * (distance / 2.0) * gamma_snr(p, q))


def ansatz_loss_rate(radius: float, mu, nu, p: float, q: float) -> float:
    """Loss rate exp(-R gamma Gamma) of the ansatz classifier on its model."""
    return rate_from_distance(radius, mean_distance(mu, nu), p, q)


def ood_loss_rate(radius: float, mu, nu, p_test: float, q_test: float) -> float:
    """Loss rate when evaluating on a graph re-drawn with densities (p', q').

    Same exponent with the SNR of the evaluation graph:
    exp(-(R/2) ||mu - nu|| Gamma(p', q')).  The means must be unchanged
    between training and evaluation for this to apply.
    """
    return rate_from_distance(radius, mean_distance(mu, nu), p_test, q_test)


_LOG2 = math.log(2.0)


def raw_loss_lower_bound(
    scale_k: float, t: float = 0.0, beta0: float = 0.5, beta1: float = 0.5
) -> float:
    """High-probability lower bound on the optimal raw training loss.

    When ||mu - nu|| <= K / sqrt(d), any norm-constrained linear classifier's
    training loss is at least 2 (beta0 ^ beta1) Phi(-(K/2)(1 + t)) log 2 with
    probability approaching 1 (in d, for fixed t >= 0; t = 0 gives the
    supremum of the family and is the default).
    """
    if not (np.isfinite(scale_k) and scale_k >= 0):
        raise ParameterError(f"scale_k must be non-negative, got {scale_k}")
    if not (np.isfinite(t) and t >= 0):
        raise ParameterError(f"t must be non-negative, got {t}")
    for name, beta in (("beta0", beta0), ("beta1", beta1)):
        if not (np.isfinite(beta) and 0.0 < beta <= 0.5):
            raise ParameterError(f"{name} must lie in (0, 1/2], got {beta}")
    return 2.0 * min(beta0, beta1) * normal_cdf(-(scale_k / 2.0) * (1.0 + t)) * _LOG2
