"""Experiment harness: configured sweeps emitting canonical CSV files.

Five experiments are provided, each a grid sweep with independently seeded
trials:

``means_sweep``
    Vary the class-mean separation at fixed edge densities.  Per distance,
    ``train_trials`` models are fit (raw and convolved pipelines) and
    evaluated against ``test_trials`` fresh draws — one row per
    (distance, train trial, test trial) pairing — alongside separability
    certificates of the training sets and the closed-form overlays.
``density_sweep``
    Vary the edge densities at fixed separation, with q locked to
    ``q_ratio * p``.
``ood_sweep``
    Train at (p, q) and evaluate each trained model on graphs re-drawn at
    every (p', q') in ``test_densities`` with the same means, scoring the
    whole re-drawn node set.
``noise_sweep``
    Train once on a dataset (an on-disk directory, or a synthetic stand-in
    drawn from the model when no dataset is given), then corrupt the graph by
    injecting random inter-class edges at each ratio rho and re-evaluate.
    Only the convolved pipeline sees the corruption; the raw pipeline's
    columns are recomputed each row and stay bit-identical.
``separability_grid``
    Certify separability across a (distance, pipeline) grid.  Three layouts:
    plain (one set of ``train_trials`` examples, certified one by one),
    grouped (``part3_sets`` sets of ``part3_size`` examples each, certified
    one by one, with ``all_separable_in_set`` reporting the AND over the
    set), and pooled (``part3_pooled=True``: the examples of a set are
    stacked into a single point cloud and certified with ONE shared
    hyperplane; the set emits a single row with ``trial=-1`` whose
    ``separable``/``margin`` columns carry the pooled verdict).  The pooled
    layout is the multi-example regime: a shared separator must exist across
    all examples at once, which fails once the number of examples competes
    with the feature dimension, whereas per-example certificates stay
    separable there.  ``part3_subsample`` caps the number of pooled points
    taken per example (a seeded subsample); since dropping points can only
    make separation easier, a non-separable pooled verdict on the subsample
    is conclusive for the full set.

Reproducibility contract: every trial's seed derives from the base seed and
the trial's grid coordinates (:func:`csbmgc.rngs.derive_seed`), rows are
sorted canonically, and floats are written with ``repr`` — so re-running a
config reproduces the CSV byte for byte, regardless of the worker count.
The manifest records the exact configuration and its hash next to each CSV.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, datasets, theory
from .errors import ParameterError
from .graph import convolve, inject_inter_class_noise
from .optim import Classifier, TrainConfig, bce_loss, solve_opt
from .rngs import MASK_STREAM, child_generator, derive_seed
from .sampling import CsbmParams, Sample, place_means, sample_csbm, sample_mask
from .separability import certify_separability

EXPERIMENTS = (
    "means_sweep",
    "density_sweep",
    "ood_sweep",
    "noise_sweep",
    "separability_grid",
)

CSV_NAME = "results.csv"
MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one experiment run.

    Only a subset of fields applies to each experiment kind; ``validate``
    enforces the per-kind requirements.  ``radius=None`` means R = d.
    """

    experiment: str
    n: int = 400
    d: int = 60
    p: float = 0.5
    q: float = 0.1
    radius: float | None = None
    beta0: float = 0.5
    beta1: float = 0.5
    base_seed: int = 0
    train_trials: int = 10
    test_trials: int = 10
    distances: tuple[float, ...] | None = None
    distance: float | None = None
    p_values: tuple[float, ...] | None = None
    q_ratio: float = 0.2
    test_n: int | None = None
    test_densities: tuple[tuple[float, float], ...] | None = None
    rho_values: tuple[float, ...] | None = None
    noise_trials: int = 10
    dataset: str | None = None
    class_id: int | None = None
    pipelines: tuple[str, ...] = ("raw", "conv")
    part3_sets: int = 0
    part3_size: int = 0
    part3_pooled: bool = False
    part3_subsample: int = 0
    certify_subset: str = "mask"
    eval_subset: str = "all"
    tolerance: float = 1e-9
    max_iterations: int = 200_000
    scale_k: float = 1.0

    def __post_init__(self):
        # Normalize JSON-borne lists to hashable tuples.
        for name in ("distances", "p_values", "rho_values", "pipelines"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, tuple(float(v) if name != "pipelines" else str(v) for v in value))
        if self.test_densities is not None:
            object.__setattr__(
                self,
                "test_densities",
                tuple((float(p), float(q)) for p, q in self.test_densities),
            )

    @property
    def effective_radius(self) -> float:
        return float(self.d) if self.radius is None else float(self.radius)

    @property
    def effective_distance(self) -> float:
        return 2.0 / math.sqrt(self.d) if self.distance is None else float(self.distance)

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ParameterError(
                f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}"
            )
        if self.n < 2 or self.d < 1:
            raise ParameterError(f"need n >= 2 and d >= 1, got n={self.n}, d={self.d}")
        for name, value in (("p", self.p), ("q", self.q)):
            if not (np.isfinite(value) and 0.0 <= value <= 1.0):
                raise ParameterError(f"{name} must lie in [0, 1], got {value}")
        for name, beta in (("beta0", self.beta0), ("beta1", self.beta1)):
            if not (np.isfinite(beta) and 0.0 < beta <= 0.5):
                raise ParameterError(f"{name} must lie in (0, 1/2], got {beta}")
        if self.radius is not None and not (np.isfinite(self.radius) and self.radius > 0):
            raise ParameterError(f"radius must be positive, got {self.radius}")
        if self.train_trials < 1 or self.test_trials < 1:
            raise ParameterError("train_trials and test_trials must be at least 1")
        if self.certify_subset not in ("mask", "all"):
            raise ParameterError(f"certify_subset must be 'mask' or 'all', got {self.certify_subset!r}")
        if self.eval_subset not in ("mask", "all"):
            raise ParameterError(f"eval_subset must be 'mask' or 'all', got {self.eval_subset!r}")

        if self.experiment == "means_sweep":
            if not self.distances:
                raise ParameterError("means_sweep requires a non-empty 'distances' list")
        elif self.experiment == "density_sweep":
            if not self.p_values:
                raise ParameterError("density_sweep requires a non-empty 'p_values' list")
            if not (0.0 < self.q_ratio <= 1.0):
                raise ParameterError(f"q_ratio must lie in (0, 1], got {self.q_ratio}")
            for p in self.p_values:
                if not (0.0 < p <= 1.0 and 0.0 <= self.q_ratio * p <= 1.0):
                    raise ParameterError(f"invalid density grid point p={p}")
        elif self.experiment == "ood_sweep":
            if not self.distances:
                raise ParameterError("ood_sweep requires a non-empty 'distances' list")
            if not self.test_densities:
                raise ParameterError("ood_sweep requires a non-empty 'test_densities' list")
            for pt, qt in self.test_densities:
                if not (0.0 <= qt <= pt <= 1.0):
                    raise ParameterError(
                        f"test densities must satisfy 0 <= q' <= p' <= 1, got ({pt}, {qt})"
                    )
        elif self.experiment == "noise_sweep":
            if self.rho_values is None or len(self.rho_values) == 0:
                raise ParameterError("noise_sweep requires a non-empty 'rho_values' list")
            for rho in self.rho_values:
                if not (np.isfinite(rho) and rho >= 0):
                    raise ParameterError(f"rho values must be non-negative, got {rho}")
            if self.noise_trials < 1:
                raise ParameterError("noise_trials must be at least 1")
        elif self.experiment == "separability_grid":
            if not self.distances:
                raise ParameterError("separability_grid requires a non-empty 'distances' list")
            for pipe in self.pipelines:
                if pipe not in ("raw", "conv"):
                    raise ParameterError(f"unknown pipeline {pipe!r} (use 'raw' or 'conv')")
            if self.part3_sets < 0 or self.part3_size < 0 or self.part3_subsample < 0:
                raise ParameterError("part3_sets, part3_size, part3_subsample must be non-negative")
            if self.part3_sets > 0 and self.part3_size < 1:
                raise ParameterError("part3_size must be at least 1 when part3_sets is set")
            if self.part3_pooled and self.part3_sets < 1:
                raise ParameterError("part3_pooled requires part3_sets >= 1")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["test_densities"] = (
            [list(pair) for pair in self.test_densities] if self.test_densities else None
        )
        for name in ("distances", "p_values", "rho_values", "pipelines"):
            value = getattr(self, name)
            out[name] = list(value) if value is not None else None
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        if "experiment" not in data:
            raise ParameterError("config must name an 'experiment'")
        clean = {k: v for k, v in data.items() if v is not None or k in ("radius",)}
        config = cls(**clean)
        config.validate()
        return config


def config_hash(config: ExperimentConfig) -> str:
    canonical = json.dumps(config.to_dict(), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ExperimentResult:
    columns: tuple[str, ...]
    rows: list[dict]
    config: ExperimentConfig


# ---------------------------------------------------------------------------
# shared machinery


def _train_config(config: ExperimentConfig) -> TrainConfig:
    return TrainConfig(
        radius=config.effective_radius,
        tolerance=config.tolerance,
        max_iterations=config.max_iterations,
    )


def _masked_sample(config: ExperimentConfig, params: CsbmParams, tag: str, coords, trial: int) -> Sample:
    seed = derive_seed(config.base_seed, config.experiment, tag, *coords, "sample", trial)
    mask_seed = derive_seed(config.base_seed, config.experiment, tag, *coords, "mask", trial)
    sample = sample_csbm(params, seed)
    return sample_mask(sample, config.beta0, config.beta1, mask_seed, clamp_to_class_size=True)


@dataclass(frozen=True)
class _FitOutcome:
    classifier: Classifier
    converged: bool
    train_loss: float
    train_error: float
    weight_norm: float


def _fit(features, labels, mask, tcfg: TrainConfig) -> _FitOutcome:
    result = solve_opt(features, labels, mask, tcfg)
    report = bce_loss(features, labels, mask, result.classifier)
    return _FitOutcome(
        classifier=result.classifier,
        converged=result.converged,
        train_loss=report.loss,
        train_error=report.error_rate,
        weight_norm=float(np.linalg.norm(result.classifier.w)),
    )


def _eval_indices(config: ExperimentConfig, sample_mask_arr, n: int):
    if config.eval_subset == "mask" and sample_mask_arr is not None and len(sample_mask_arr):
        return sample_mask_arr
    return None  # all nodes


def _certify_indices(config: ExperimentConfig, sample: Sample):
    if config.certify_subset == "mask" and sample.mask is not None and len(sample.mask):
        return sample.mask
    return None


# ---------------------------------------------------------------------------
# means_sweep / density_sweep

_SWEEP_COLUMNS = (
    "train_trial",
    "test_trial",
    "train_seed",
    "mask_seed",
    "test_seed",
    "train_loss_raw",
    "train_loss_conv",
    "test_loss_raw",
    "test_loss_conv",
    "train_err_raw",
    "train_err_conv",
    "test_err_raw",
    "test_err_conv",
    "sep_raw",
    "sep_conv",
    "margin_raw",
    "margin_conv",
    "w_norm_raw",
    "w_norm_conv",
    "converged_raw",
    "converged_conv",
    "ansatz_rate",
    "lower_bound",
)

MEANS_SWEEP_COLUMNS = ("distance",) + _SWEEP_COLUMNS + (
    "threshold_raw",
    "threshold_conv_lower",
    "threshold_conv_upper",
)

DENSITY_SWEEP_COLUMNS = ("p", "q") + _SWEEP_COLUMNS + ("p_reference",)


def _sweep_point_rows(config: ExperimentConfig, p: float, q: float, distance: float, coords) -> list[dict]:
    """Shared train/test-pairing engine behind the means and density sweeps."""
    mu, nu = place_means(distance, config.d)
    params = CsbmParams(n=config.n, d=config.d, p=p, q=q, mu=mu, nu=nu)
    tcfg = _train_config(config)
    radius = config.effective_radius
    rate = theory.rate_from_distance(radius, distance, p, q)
    bound = theory.raw_loss_lower_bound(
        distance * math.sqrt(config.d), 0.0, config.beta0, config.beta1
    )

    trained = []
    for i in range(config.train_trials):
        sample = _masked_sample(config, params, "train", coords, i)
        conv = convolve(sample.adjacency, sample.features).values
        fit_raw = _fit(sample.features, sample.labels, sample.mask, tcfg)
        fit_conv = _fit(conv, sample.labels, sample.mask, tcfg)
        indices = _certify_indices(config, sample)
        cert_raw = certify_separability(sample.features, sample.labels, indices)
        cert_conv = certify_separability(conv, sample.labels, indices)
        trained.append((sample, fit_raw, fit_conv, cert_raw, cert_conv))

    tests = []
    test_n = config.test_n or config.n
    test_params = CsbmParams(n=test_n, d=config.d, p=p, q=q, mu=mu, nu=nu)
    for j in range(config.test_trials):
        seed = derive_seed(config.base_seed, config.experiment, "test", *coords, "sample", j)
        test = sample_csbm(test_params, seed)
        tests.append((test, convolve(test.adjacency, test.features).values))

    rows = []
    for i, (sample, fit_raw, fit_conv, cert_raw, cert_conv) in enumerate(trained):
        for j, (test, test_conv) in enumerate(tests):
            eval_raw = bce_loss(test.features, test.labels, None, fit_raw.classifier)
            eval_conv = bce_loss(test_conv, test.labels, None, fit_conv.classifier)
            rows.append(
                {
                    "train_trial": i,
                    "test_trial": j,
                    "train_seed": sample.seed,
                    "mask_seed": sample.mask_seed,
                    "test_seed": test.seed,
                    "train_loss_raw": fit_raw.train_loss,
                    "train_loss_conv": fit_conv.train_loss,
                    "test_loss_raw": eval_raw.loss,
                    "test_loss_conv": eval_conv.loss,
                    "train_err_raw": fit_raw.train_error,
                    "train_err_conv": fit_conv.train_error,
                    "test_err_raw": eval_raw.error_rate,
                    "test_err_conv": eval_conv.error_rate,
                    "sep_raw": cert_raw.separable,
                    "sep_conv": cert_conv.separable,
                    "margin_raw": cert_raw.margin,
                    "margin_conv": cert_conv.margin,
                    "w_norm_raw": fit_raw.weight_norm,
                    "w_norm_conv": fit_conv.weight_norm,
                    "converged_raw": fit_raw.converged,
                    "converged_conv": fit_conv.converged,
                    "ansatz_rate": rate,
                    "lower_bound": bound,
                }
            )
    return rows


def _means_unit(config: ExperimentConfig, distance: float) -> list[dict]:
    marks = theory.thresholds(config.n, config.d, config.p, config.q, config.scale_k)
    rows = _sweep_point_rows(config, config.p, config.q, distance, (distance,))
    for row in rows:
        row["distance"] = distance
        row["threshold_raw"] = marks.raw_scale
        row["threshold_conv_lower"] = marks.convolved_lower
        row["threshold_conv_upper"] = marks.convolved_upper
    return rows


def _density_unit(config: ExperimentConfig, p: float) -> list[dict]:
    q = config.q_ratio * p
    rows = _sweep_point_rows(config, p, q, config.effective_distance, (p,))
    p_ref = math.log(config.n) ** 2 / config.n
    for row in rows:
        row["p"] = p
        row["q"] = q
        row["p_reference"] = p_ref
    return rows


# ---------------------------------------------------------------------------
# ood_sweep

OOD_SWEEP_COLUMNS = (
    "distance",
    "p_test",
    "q_test",
    "train_trial",
    "test_trial",
    "train_seed",
    "mask_seed",
    "test_seed",
    "train_loss_raw",
    "train_loss_conv",
    "test_loss_raw",
    "test_loss_conv",
    "test_err_raw",
    "test_err_conv",
    "gamma_test",
    "ood_rate",
    "w_norm_raw",
    "w_norm_conv",
    "converged_raw",
    "converged_conv",
)


def _ood_unit(config: ExperimentConfig, distance: float) -> list[dict]:
    mu, nu = place_means(distance, config.d)
    params = CsbmParams(n=config.n, d=config.d, p=config.p, q=config.q, mu=mu, nu=nu)
    tcfg = _train_config(config)
    radius = config.effective_radius

    trained = []
    for i in range(config.train_trials):
        sample = _masked_sample(config, params, "train", (distance,), i)
        conv = convolve(sample.adjacency, sample.features).values
        fit_raw = _fit(sample.features, sample.labels, sample.mask, tcfg)
        fit_conv = _fit(conv, sample.labels, sample.mask, tcfg)
        trained.append((sample, fit_raw, fit_conv))

    rows = []
    test_n = config.test_n or config.n
    for p_test, q_test in config.test_densities:
        test_params = CsbmParams(n=test_n, d=config.d, p=p_test, q=q_test, mu=mu, nu=nu)
        gamma_test = theory.gamma_snr(p_test, q_test)
        rate = theory.rate_from_distance(radius, distance, p_test, q_test)
        for j in range(config.test_trials):
            seed = derive_seed(
                config.base_seed, config.experiment, "test", distance, p_test, q_test, "sample", j
            )
            test = sample_csbm(test_params, seed)
            test_conv = convolve(test.adjacency, test.features).values
            for i, (sample, fit_raw, fit_conv) in enumerate(trained):
                eval_raw = bce_loss(test.features, test.labels, None, fit_raw.classifier)
                eval_conv = bce_loss(test_conv, test.labels, None, fit_conv.classifier)
                rows.append(
                    {
                        "distance": distance,
                        "p_test": p_test,
                        "q_test": q_test,
                        "train_trial": i,
                        "test_trial": j,
                        "train_seed": sample.seed,
                        "mask_seed": sample.mask_seed,
                        "test_seed": test.seed,
                        "train_loss_raw": fit_raw.train_loss,
                        "train_loss_conv": fit_conv.train_loss,
                        "test_loss_raw": eval_raw.loss,
                        "test_loss_conv": eval_conv.loss,
                        "test_err_raw": eval_raw.error_rate,
                        "test_err_conv": eval_conv.error_rate,
                        "gamma_test": gamma_test,
                        "ood_rate": rate,
                        "w_norm_raw": fit_raw.weight_norm,
                        "w_norm_conv": fit_conv.weight_norm,
                        "converged_raw": fit_raw.converged,
                        "converged_conv": fit_conv.converged,
                    }
                )
    return rows


# ---------------------------------------------------------------------------
# noise_sweep

NOISE_SWEEP_COLUMNS = (
    "rho",
    "noise_trial",
    "noise_seed",
    "achieved_rho",
    "edges_added",
    "inter_class_edges",
    "test_loss_raw",
    "test_loss_conv",
    "test_err_raw",
    "test_err_conv",
    "baseline_loss_raw",
    "baseline_loss_conv",
    "baseline_err_raw",
    "baseline_err_conv",
)


@dataclass(frozen=True)
class _NoiseContext:
    features: np.ndarray
    labels: np.ndarray
    adjacency: object
    mask: np.ndarray
    clf_raw: Classifier
    clf_conv: Classifier
    eval_indices: object
    baseline_loss_raw: float
    baseline_err_raw: float
    baseline_loss_conv: float
    baseline_err_conv: float


def _noise_task(config: ExperimentConfig):
    """Resolve the dataset the noise sweep runs on (on-disk or synthetic)."""
    if config.dataset is not None:
        ds = datasets.load_dataset(config.dataset)
        if ds.num_classes > 2 or config.class_id is not None:
            task = datasets.one_vs_all(ds, 0 if config.class_id is None else config.class_id)
            return task.features, task.labels, task.adjacency, task.mask
        return ds.features, ds.labels.astype(np.int8), ds.adjacency, ds.mask
    distance = config.effective_distance
    mu, nu = place_means(distance, config.d)
    params = CsbmParams(n=config.n, d=config.d, p=config.p, q=config.q, mu=mu, nu=nu)
    sample = _masked_sample(config, params, "standin", (distance,), 0)
    return sample.features, sample.labels, sample.adjacency, sample.mask


def _noise_context(config: ExperimentConfig) -> _NoiseContext:
    features, labels, adjacency, mask = _noise_task(config)
    if mask is None or len(mask) == 0:
        raise ParameterError("noise_sweep requires a labeled mask to train on")
    tcfg = _train_config(config)
    conv = convolve(adjacency, features).values
    fit_raw = _fit(features, labels, mask, tcfg)
    fit_conv = _fit(conv, labels, mask, tcfg)
    eval_idx = _eval_indices(config, mask, len(labels))
    base_raw = bce_loss(features, labels, eval_idx, fit_raw.classifier)
    base_conv = bce_loss(conv, labels, eval_idx, fit_conv.classifier)
    return _NoiseContext(
        features=features,
        labels=labels,
        adjacency=adjacency,
        mask=mask,
        clf_raw=fit_raw.classifier,
        clf_conv=fit_conv.classifier,
        eval_indices=eval_idx,
        baseline_loss_raw=base_raw.loss,
        baseline_err_raw=base_raw.error_rate,
        baseline_loss_conv=base_conv.loss,
        baseline_err_conv=base_conv.error_rate,
    )


def _noise_unit(config: ExperimentConfig, ctx: _NoiseContext, rho: float) -> list[dict]:
    rows = []
    for trial in range(config.noise_trials):
        seed = derive_seed(config.base_seed, config.experiment, "noise", rho, "inject", trial)
        injection = inject_inter_class_noise(ctx.adjacency, ctx.labels, rho, seed)
        noisy_conv = convolve(injection.adjacency, ctx.features).values
        eval_raw = bce_loss(ctx.features, ctx.labels, ctx.eval_indices, ctx.clf_raw)
        eval_conv = bce_loss(noisy_conv, ctx.labels, ctx.eval_indices, ctx.clf_conv)
        rows.append(
            {
                "rho": rho,
                "noise_trial": trial,
                "noise_seed": seed,
                "achieved_rho": injection.achieved_rho,
                "edges_added": injection.edges_added,
                "inter_class_edges": injection.inter_class_edges_before,
                "test_loss_raw": eval_raw.loss,
                "test_loss_conv": eval_conv.loss,
                "test_err_raw": eval_raw.error_rate,
                "test_err_conv": eval_conv.error_rate,
                "baseline_loss_raw": ctx.baseline_loss_raw,
                "baseline_loss_conv": ctx.baseline_loss_conv,
                "baseline_err_raw": ctx.baseline_err_raw,
                "baseline_err_conv": ctx.baseline_err_conv,
            }
        )
    return rows


# ---------------------------------------------------------------------------
# separability_grid

SEPARABILITY_GRID_COLUMNS = (
    "distance",
    "pipeline",
    "set_index",
    "trial",
    "seed",
    "mask_seed",
    "separable",
    "margin",
    "lp_status",
    "all_separable_in_set",
)


def _grid_example(config: ExperimentConfig, params: CsbmParams, pipeline: str,
                  distance: float, set_index: int, trial: int):
    sample = _masked_sample(config, params, "grid", (distance, set_index), trial)
    if pipeline == "conv":
        features = convolve(sample.adjacency, sample.features).values
    else:
        features = sample.features
    indices = _certify_indices(config, sample)
    if indices is None:
        indices = np.arange(sample.n)
    return sample, features, np.asarray(indices)


def _separability_unit(config: ExperimentConfig, distance: float) -> list[dict]:
    mu, nu = place_means(distance, config.d)
    params = CsbmParams(n=config.n, d=config.d, p=config.p, q=config.q, mu=mu, nu=nu)
    sets = config.part3_sets if config.part3_sets > 0 else 1
    size = config.part3_size if config.part3_sets > 0 else config.train_trials

    rows = []
    for pipeline in config.pipelines:
        for set_index in range(sets):
            if config.part3_pooled:
                pooled_x, pooled_y = [], []
                first = None
                for trial in range(size):
                    sample, features, indices = _grid_example(
                        config, params, pipeline, distance, set_index, trial
                    )
                    if first is None:
                        first = sample
                    if 0 < config.part3_subsample < len(indices):
                        sub_seed = derive_seed(
                            config.base_seed, config.experiment, "grid",
                            distance, set_index, "subsample", trial,
                        )
                        picker = child_generator(sub_seed, MASK_STREAM)
                        indices = np.sort(
                            picker.choice(indices, size=config.part3_subsample, replace=False)
                        )
                    pooled_x.append(features[indices])
                    pooled_y.append(np.asarray(sample.labels)[indices])
                cert = certify_separability(np.vstack(pooled_x), np.concatenate(pooled_y))
                rows.append(
                    {
                        "distance": distance,
                        "pipeline": pipeline,
                        "set_index": set_index,
                        "trial": -1,
                        "seed": first.seed,
                        "mask_seed": first.mask_seed,
                        "separable": cert.separable,
                        "margin": cert.margin,
                        "lp_status": cert.lp_status,
                        "all_separable_in_set": cert.separable,
                    }
                )
                continue
            set_rows = []
            for trial in range(size):
                sample, features, indices = _grid_example(
                    config, params, pipeline, distance, set_index, trial
                )
                cert = certify_separability(features, sample.labels, indices)
                set_rows.append(
                    {
                        "distance": distance,
                        "pipeline": pipeline,
                        "set_index": set_index,
                        "trial": trial,
                        "seed": sample.seed,
                        "mask_seed": sample.mask_seed,
                        "separable": cert.separable,
                        "margin": cert.margin,
                        "lp_status": cert.lp_status,
                    }
                )
            all_separable = all(r["separable"] for r in set_rows)
            for r in set_rows:
                r["all_separable_in_set"] = all_separable
            rows.extend(set_rows)
    return rows


# ---------------------------------------------------------------------------
# dispatch, CSV writing

_SORT_KEYS = {
    "means_sweep": ("distance", "train_trial", "test_trial"),
    "density_sweep": ("p", "train_trial", "test_trial"),
    "ood_sweep": ("distance", "p_test", "q_test", "train_trial", "test_trial"),
    "noise_sweep": ("rho", "noise_trial"),
    "separability_grid": ("distance", "pipeline", "set_index", "trial"),
}

_COLUMNS = {
    "means_sweep": MEANS_SWEEP_COLUMNS,
    "density_sweep": DENSITY_SWEEP_COLUMNS,
    "ood_sweep": OOD_SWEEP_COLUMNS,
    "noise_sweep": NOISE_SWEEP_COLUMNS,
    "separability_grid": SEPARABILITY_GRID_COLUMNS,
}


def _units(config: ExperimentConfig) -> list:
    if config.experiment == "means_sweep":
        return [(_means_unit, (config, dist)) for dist in config.distances]
    if config.experiment == "density_sweep":
        return [(_density_unit, (config, p)) for p in config.p_values]
    if config.experiment == "ood_sweep":
        return [(_ood_unit, (config, dist)) for dist in config.distances]
    if config.experiment == "noise_sweep":
        ctx = _noise_context(config)
        return [(_noise_unit, (config, ctx, rho)) for rho in config.rho_values]
    if config.experiment == "separability_grid":
        return [(_separability_unit, (config, dist)) for dist in config.distances]
    raise ParameterError(f"unknown experiment {config.experiment!r}")


def _call_unit(unit) -> list[dict]:
    fn, args = unit
    return fn(*args)


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Execute all grid units of ``config`` and return canonical sorted rows."""
    config.validate()
    units = _units(config)
    if jobs > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_call_unit, units))
    else:
        chunks = [_call_unit(u) for u in units]
    rows = [row for chunk in chunks for row in chunk]

    for row in rows:  # cheap global sanity invariants
        for key, value in row.items():
            if key.endswith(("loss_raw", "loss_conv")) or key.startswith(("margin", "ansatz", "lower")):
                if isinstance(value, float) and not (np.isfinite(value) and value >= 0):
                    raise ParameterError(f"invariant violation: {key}={value}")

    sort_cols = _SORT_KEYS[config.experiment]
    rows.sort(key=lambda r: tuple(r[c] for c in sort_cols))
    return ExperimentResult(columns=_COLUMNS[config.experiment], rows=rows, config=config)


def format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: str, columns, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(format_cell(row[c]) for c in columns) + "\n")


def write_outputs(
    result: ExperimentResult, out_dir: str, force: bool = False, wall_time_s: float | None = None
) -> str:
    """Write results.csv and manifest.json under ``out_dir``; return CSV path."""
    csv_path = os.path.join(out_dir, CSV_NAME)
    if os.path.exists(csv_path) and not force:
        raise ParameterError(f"{csv_path} exists; pass force=True to overwrite")
    os.makedirs(out_dir, exist_ok=True)
    write_csv(csv_path, result.columns, result.rows)
    manifest = {
        "experiment": result.config.experiment,
        "config": result.config.to_dict(),
        "config_sha256": config_hash(result.config),
        "csv": CSV_NAME,
        "rows": len(result.rows),
        "columns": list(result.columns),
        "artifact_version": __version__,
        "wall_time_s": wall_time_s,
    }
    with open(os.path.join(out_dir, MANIFEST_NAME), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path


def run_and_write(config: ExperimentConfig, out_dir: str, jobs: int = 1, force: bool = False) -> str:
    start = time.monotonic()
    result = run_experiment(config, jobs=jobs)
    return write_outputs(result, out_dir, force=force, wall_time_s=time.monotonic() - start)


# ---------------------------------------------------------------------------
# presets


def preset(name: str) -> ExperimentConfig:
    """Ready-made configurations mirroring the headline experiment setups."""
    d = 60
    if name == "fig1":
        scale = 1.0 / math.sqrt(d)
        return ExperimentConfig(
            experiment="means_sweep",
            distances=tuple(f * scale for f in (0.05, 0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0)),
        )
    if name == "fig2":
        n = 400
        return ExperimentConfig(
            experiment="density_sweep",
            p_values=tuple(float(p) for p in np.geomspace(1.0 / n, 0.5, 10)),
        )
    if name == "fig3":
        scale = 1.0 / math.sqrt(d)
        return ExperimentConfig(
            experiment="ood_sweep",
            distances=(2.0 * scale, 16.0 * scale),
            test_densities=(
                (0.5, 0.1),
                (0.5, 0.38),
                (0.7, 0.1),
                (0.7, 0.38),
                (0.7, 0.67),
                (0.9, 0.1),
                (0.9, 0.38),
                (0.9, 0.67),
                (1.0, 0.1),
                (1.0, 0.38),
                (1.0, 0.67),
                (1.0, 0.95),
            ),
        )
    if name == "fig4":
        return ExperimentConfig(
            experiment="noise_sweep",
            n=2000,
            d=50,
            p=0.02,
            q=0.005,
            distance=0.7,
            beta0=0.25,
            beta1=0.25,
            rho_values=(0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0),
        )
    raise ParameterError(f"unknown preset {name!r} (use fig1, fig2, fig3, or fig4)")
