"""Command-line entry points.

Subcommands::

    csbmgc sample      draw a model instance and write it as a dataset directory
    csbmgc convolve    read a dataset and write degree-normalized neighborhood means
    csbmgc train       fit the constrained logistic classifier on a dataset
    csbmgc certify     run the linear-separability certificate on a dataset
    csbmgc theory      print closed-form quantities (SNR, thresholds, rates, bounds)
    csbmgc experiment  run a configured sweep and write results.csv + manifest.json

Exit codes: 0 success; 1 usage error; 2 invalid parameters or malformed data;
3 numerical failure (non-convergence, solver breakdown).
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__, datasets, storage, theory
from .errors import NumericalError, SimplexError
from .experiments import ExperimentConfig, preset, run_and_write
from .graph import convolve
from .optim import TrainConfig, bce_loss, solve_opt
from .sampling import CsbmParams, load_sample, place_means, sample_csbm, sample_mask, save_sample
from .separability import certify_separability


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_features(args):
    """Load a dataset directory and return (features, labels, mask) per pipeline."""
    ds = datasets.load_dataset(args.data)
    features = ds.features
    if args.pipeline == "conv":
        features = convolve(ds.adjacency, ds.features).values
    return ds, features


def _cmd_sample(args) -> int:
    mu, nu = place_means(args.distance, args.d)
    params = CsbmParams(
        n=args.n, d=args.d, p=args.p, q=args.q, mu=mu, nu=nu,
        feature_variance_scale=args.scale,
    )
    sample = sample_csbm(params, args.seed)
    if args.beta0 > 0 or args.beta1 > 0:
        mask_seed = args.mask_seed if args.mask_seed is not None else args.seed + 1
        sample = sample_mask(sample, args.beta0, args.beta1, mask_seed, clamp_to_class_size=args.clamp)
    save_sample(params, sample, args.out, force=args.force)
    counts = np.bincount(sample.labels, minlength=2)
    _emit(
        {
            "out": args.out,
            "n": sample.n,
            "d": sample.d,
            "class_counts": [int(counts[0]), int(counts[1])],
            "edges": int(sample.adjacency.sum() // 2)
            if not hasattr(sample.adjacency, "nnz")
            else int(sample.adjacency.nnz // 2),
            "mask_size": 0 if sample.mask is None else int(len(sample.mask)),
            "seed": args.seed,
        },
        None,
    )
    return 0


def _cmd_convolve(args) -> int:
    ds = datasets.load_dataset(args.data)
    conv = convolve(ds.adjacency, ds.features)
    storage.write_features(args.out, conv.values)
    _emit({"out": args.out, "n": ds.n, "d": ds.d, "graph_digest": conv.graph_digest}, None)
    return 0


def _cmd_train(args) -> int:
    ds, features = _load_features(args)
    labels = ds.labels.astype(np.int8)
    config = TrainConfig(
        radius=args.radius if args.radius is not None else float(ds.d),
        step_mode=args.step_mode,
        tolerance=args.tolerance,
        max_iterations=args.max_iterations,
    )
    result = solve_opt(features, labels, ds.mask, config)
    full = bce_loss(features, labels, None, result.classifier)
    payload = {
        "pipeline": args.pipeline,
        "w": [float(v) for v in result.classifier.w],
        "b": result.classifier.b,
        "train_loss": result.final_loss,
        "full_loss": full.loss,
        "full_error_rate": full.error_rate,
        "iterations": result.iterations,
        "converged": result.converged,
        "step_size": result.step_size,
        "radius": config.radius,
    }
    _emit(payload, args.out)
    if not result.converged:
        print("train: did not reach tolerance within iteration budget", file=sys.stderr)
        return 3
    return 0


def _cmd_certify(args) -> int:
    ds, features = _load_features(args)
    labels = ds.labels.astype(np.int8)
    indices = ds.mask if (args.subset == "mask" and ds.mask is not None and len(ds.mask)) else None
    cert = certify_separability(features, labels, indices)
    _emit(
        {
            "pipeline": args.pipeline,
            "subset": args.subset,
            "separable": bool(cert.separable),
            "margin": cert.margin,
            "lp_status": cert.lp_status,
            "witness_b": cert.witness_b,
            "witness_v": [float(v) for v in cert.witness_v],
            "points": int(len(cert.indices)),
        },
        args.out,
    )
    return 0


def _cmd_theory(args) -> int:
    if args.quantity == "gamma":
        payload = {"gamma": theory.gamma_snr(args.p, args.q)}
    elif args.quantity == "thresholds":
        marks = theory.thresholds(args.n, args.d, args.p, args.q, args.scale_k)
        payload = {
            "raw_scale": marks.raw_scale,
            "convolved_lower": marks.convolved_lower,
            "convolved_upper": marks.convolved_upper,
            "convolved_upper_unhalved": marks.convolved_upper_unhalved,
            "mean_degree": marks.mean_degree,
        }
    elif args.quantity == "ansatz-rate":
        payload = {
            "rate": theory.rate_from_distance(args.radius, args.distance, args.p, args.q),
            "gamma": theory.gamma_snr(args.p, args.q),
        }
    elif args.quantity == "ood-rate":
        payload = {
            "rate": theory.rate_from_distance(args.radius, args.distance, args.p_test, args.q_test),
            "gamma_test": theory.gamma_snr(args.p_test, args.q_test),
        }
    else:  # lower-bound
        payload = {
            "lower_bound": theory.raw_loss_lower_bound(args.scale_k, args.t, args.beta0, args.beta1),
            "phi": theory.normal_cdf(-(args.scale_k / 2.0) * (1.0 + args.t)),
        }
    _emit(payload, args.out)
    return 0


def _cmd_experiment(args) -> int:
    if args.preset:
        config = preset(args.preset)
        if args.base_seed is not None:
            config = ExperimentConfig.from_dict({**config.to_dict(), "base_seed": args.base_seed})
    else:
        with open(args.config, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if args.base_seed is not None:
            data["base_seed"] = args.base_seed
        config = ExperimentConfig.from_dict(data)
    csv_path = run_and_write(config, args.out, jobs=args.jobs, force=args.force)
    _emit({"csv": csv_path, "experiment": config.experiment}, None)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="csbmgc", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sample", help="draw a model instance into a dataset directory")
    sp.add_argument("--n", type=int, default=400)
    sp.add_argument("--d", type=int, default=60)
    sp.add_argument("--p", type=float, default=0.5)
    sp.add_argument("--q", type=float, default=0.1)
    sp.add_argument("--distance", type=float, default=2.0 / math.sqrt(60.0),
                    help="class-mean separation; means sit at +/- distance/2 on the first axis")
    sp.add_argument("--scale", type=float, default=1.0, help="feature variance scale")
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--beta0", type=float, default=0.5, help="labeled fraction of class 0 (0 disables the mask)")
    sp.add_argument("--beta1", type=float, default=0.5)
    sp.add_argument("--mask-seed", type=int, default=None)
    sp.add_argument(
        "--clamp",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="clamp mask quotas to the realized class sizes (--no-clamp to fail instead)",
    )
    sp.add_argument("--out", required=True)
    sp.add_argument("--force", action="store_true")
    sp.set_defaults(func=_cmd_sample)

    cp = sub.add_parser("convolve", help="write degree-normalized neighborhood means as CSV")
    cp.add_argument("--data", required=True)
    cp.add_argument("--out", required=True)
    cp.set_defaults(func=_cmd_convolve)

    tp = sub.add_parser("train", help="fit the norm-constrained logistic classifier")
    tp.add_argument("--data", required=True)
    tp.add_argument("--pipeline", choices=("raw", "conv"), default="raw")
    tp.add_argument("--radius", type=float, default=None, help="weight-norm bound (default: d)")
    tp.add_argument("--step-mode", choices=("fixed", "backtracking"), default="fixed")
    tp.add_argument("--tolerance", type=float, default=1e-9)
    tp.add_argument("--max-iterations", type=int, default=200_000)
    tp.add_argument("--out", default=None)
    tp.set_defaults(func=_cmd_train)

    cf = sub.add_parser("certify", help="linear-separability certificate via the margin LP")
    cf.add_argument("--data", required=True)
    cf.add_argument("--pipeline", choices=("raw", "conv"), default="raw")
    cf.add_argument("--subset", choices=("mask", "all"), default="mask")
    cf.add_argument("--out", default=None)
    cf.set_defaults(func=_cmd_certify)

    th = sub.add_parser("theory", help="closed-form quantities")
    th.add_argument("quantity", choices=("gamma", "thresholds", "ansatz-rate", "ood-rate", "lower-bound"))
    th.add_argument("--n", type=int, default=400)
    th.add_argument("--d", type=int, default=60)
    th.add_argument("--p", type=float, default=0.5)
    th.add_argument("--q", type=float, default=0.1)
    th.add_argument("--p-test", type=float, default=0.5)
    th.add_argument("--q-test", type=float, default=0.1)
    th.add_argument("--distance", type=float, default=2.0 / math.sqrt(60.0))
    th.add_argument("--radius", type=float, default=60.0)
    th.add_argument("--scale-k", type=float, default=1.0)
    th.add_argument("--t", type=float, default=0.0)
    th.add_argument("--beta0", type=float, default=0.5)
    th.add_argument("--beta1", type=float, default=0.5)
    th.add_argument("--out", default=None)
    th.set_defaults(func=_cmd_theory)

    ep = sub.add_parser("experiment", help="run a configured sweep")
    group = ep.add_mutually_exclusive_group(required=True)
    group.add_argument("--config", help="JSON config file")
    group.add_argument("--preset", choices=("fig1", "fig2", "fig3", "fig4"))
    ep.add_argument("--out", required=True, help="output directory")
    ep.add_argument("--jobs", type=int, default=1)
    ep.add_argument("--force", action="store_true")
    ep.add_argument("--base-seed", type=int, default=None)
    ep.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse funnels usage errors and --help here
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (NumericalError, SimplexError) as exc:
        print(f"csbmgc: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"csbmgc: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
