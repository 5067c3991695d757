"""Command-line interface: weigh rigs, render views, run experiments, train.

Exit codes: 0 success, 1 failed checks, 2 malformed input, 3 degenerate
rig, 4 diverged training.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings

import numpy as np

from .attention import init_caw, load_caw, save_caw, train_caw
from .errors import DegenerateRigWarning, DivergedTrainingError, ExhaustedSamplingError
from .experiments import (
    DEFAULT_CLOSE_ANGLE,
    DEFAULT_VIEW_COUNTS,
    ExperimentConfig,
    TrainSetup,
    make_training_set,
    run_one_close_view,
    run_random_views,
    run_view_sweep,
    write_rows_csv,
)
from .image_io import write_ppm
from .pose import CameraRig, load_rig
from .renderer import BenchConfig, encode_source_view, render_novel_view
from .scene import generate_scene
from .verification import run_gradient_checks
from .weighting import SchemeConfig, compute_weights

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_MALFORMED = 2
EXIT_DEGENERATE = 3
EXIT_DIVERGED = 4


def _scheme_from_flags(args) -> SchemeConfig:
    kwargs = {"epsilon": args.epsilon}
    if args.scheme == "gauss":
        kwargs["beta"] = args.beta if args.beta is not None else 1.0
    elif args.beta is not None:
        raise ValueError("--beta only applies to the gauss scheme")
    if args.scheme == "err":
        kwargs["alpha"] = args.alpha if args.alpha is not None else 1.0
    elif args.alpha is not None:
        raise ValueError("--alpha only applies to the err scheme")
    return SchemeConfig(args.scheme, **kwargs)


def parse_scheme_token(token: str) -> SchemeConfig:
    """Parse one scheme spec like "mean", "gauss=0.3" or "err=1.0"."""
    name, _, value = token.partition("=")
    name = name.strip()
    if name == "gauss":
        return SchemeConfig("gauss", beta=float(value) if value else 1.0)
    if name == "err":
        return SchemeConfig("err", alpha=float(value) if value else 1.0)
    if value:
        raise ValueError(f"scheme {name!r} takes no parameter")
    return SchemeConfig(name)


def _load_caw_if_needed(schemes, path):
    if not any(sc.scheme == "caw" for sc in schemes):
        return None
    if path is None:
        raise ValueError("scheme 'caw' needs --caw-params")
    return load_caw(path)


def _weights_or_exit(rig: CameraRig, cfg: SchemeConfig, caw):
    """Compute weights, converting degeneracy fallbacks into exit code 3."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        weights = compute_weights(rig, cfg, caw)
    degenerate = [w for w in caught if issubclass(w.category, DegenerateRigWarning)]
    if degenerate:
        print(f"degenerate rig: {degenerate[0].message}", file=sys.stderr)
        raise SystemExit(EXIT_DEGENERATE)
    return weights


def cmd_weigh(args) -> int:
    try:
        rig = load_rig(args.rig)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"malformed rig {args.rig}: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    try:
        cfg = _scheme_from_flags(args)
        caw = _load_caw_if_needed([cfg], args.caw_params)
    except (OSError, ValueError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_MALFORMED
    weights = _weights_or_exit(rig, cfg, caw)
    print(json.dumps([float(w) for w in weights]))
    return EXIT_OK


def cmd_render(args) -> int:
    try:
        rig = load_rig(args.rig)
        cfg = _scheme_from_flags(args)
        caw = _load_caw_if_needed([cfg], args.caw_params)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    bench = _bench_from_args(args)
    scene = generate_scene(args.scene_seed)
    weights = _weights_or_exit(rig, cfg, caw)
    volumes = [
        encode_source_view(scene, bench.frustum(p), bench.volume_resolution) for p in rig.sources
    ]
    seed = args.render_seed if args.render_seed is not None else args.scene_seed
    image = render_novel_view(
        volumes,
        bench.frustum(rig.target),
        weights,
        (bench.image_size, bench.image_size),
        bench.n_samples,
        seed,
    )
    write_ppm(args.out, image)
    print(f"wrote {args.out}")
    return EXIT_OK


def _bench_from_args(args) -> BenchConfig:
    kwargs = {}
    if getattr(args, "size", None) is not None:
        kwargs["image_size"] = args.size
    if getattr(args, "samples", None) is not None:
        kwargs["n_samples"] = args.samples
    if getattr(args, "volume_res", None) is not None:
        kwargs["volume_resolution"] = tuple(args.volume_res)
    return BenchConfig(**kwargs)


def cmd_experiment(args) -> int:
    try:
        schemes = tuple(parse_scheme_token(tok) for tok in args.schemes.split(","))
        caw = _load_caw_if_needed(schemes, args.caw_params)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    cfg = ExperimentConfig(
        n_scenes=args.scenes,
        n_sources=args.sources,
        seed=args.seed,
        schemes=schemes,
        close_angle=args.close_angle,
        view_counts=tuple(int(v) for v in args.view_counts.split(",")),
        targets_per_scene=args.targets_per_scene,
        bench=_bench_from_args(args),
    )
    runner = {"random": run_random_views, "close": run_one_close_view, "sweep": run_view_sweep}
    try:
        rows = runner[args.protocol](cfg, caw)
    except ExhaustedSamplingError as exc:
        print(f"sampling failed: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    write_rows_csv(args.out, rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def cmd_train_caw(args) -> int:
    setup = TrainSetup(
        n_sources=args.sources,
        image_size=args.train_size,
        n_samples=args.train_samples,
    )
    examples = make_training_set(args.seed, args.scenes, setup, rigs_per_scene=args.rigs_per_scene)
    module = init_caw(seed=args.seed)
    try:
        module, history = train_caw(module, examples, args.epochs, seed=args.seed, lr=args.lr)
    except DivergedTrainingError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    save_caw(args.out, module)
    with open(args.loss_out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "mean_loss"])
        for epoch, loss in enumerate(history):
            writer.writerow([epoch, f"{loss:.10g}"])
    print(f"wrote {args.out} and {args.loss_out}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    results = run_gradient_checks(corrupt=args.corrupt_gradients)
    ok = True
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name}: max relative error {r.max_rel_err:.3e} (threshold {r.threshold:.0e}) {status}")
        ok = ok and r.passed
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_report(args) -> int:
    from .report import generate_report

    try:
        written = generate_report(args.csv, args.out_dir, loss_csv=args.loss_csv)
    except (OSError, ValueError) as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def _add_scheme_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scheme", required=True, choices=["mean", "l1", "fro", "gauss", "err", "caw"])
    p.add_argument("--alpha", type=float, default=None, help="err mix of angle vs distance (default 1.0)")
    p.add_argument("--beta", type=float, default=None, help="gauss kernel sharpness (default 1.0)")
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--caw-params", default=None, help="trained module JSON (scheme caw)")


def _add_bench_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--size", type=int, default=None, help="square render size (default 64)")
    p.add_argument("--samples", type=int, default=None, help="ray samples (default 64)")
    p.add_argument("--volume-res", type=int, nargs=3, default=None, metavar=("NX", "NY", "NZ"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="camweight", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("weigh", help="print the weight vector of a rig as JSON")
    p.add_argument("--rig", required=True)
    _add_scheme_flags(p)
    p.set_defaults(func=cmd_weigh)

    p = sub.add_parser("render", help="render a novel view of a seeded scene as PPM")
    p.add_argument("--scene-seed", type=int, required=True)
    p.add_argument("--rig", required=True)
    _add_scheme_flags(p)
    _add_bench_flags(p)
    p.add_argument("--render-seed", type=int, default=None, help="stratification seed (default scene seed)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("experiment", help="run a protocol over seeded scenes, emit CSV")
    p.add_argument("protocol", choices=["random", "close", "sweep"])
    p.add_argument("--scenes", type=int, default=20)
    p.add_argument("--sources", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--schemes", default="mean,err=1.0", help="comma list, e.g. mean,err=1.0,gauss=0.3")
    p.add_argument("--close-angle", type=float, default=DEFAULT_CLOSE_ANGLE)
    p.add_argument("--view-counts", default=",".join(str(v) for v in DEFAULT_VIEW_COUNTS))
    p.add_argument("--targets-per-scene", type=int, default=3, help="sweep protocol only")
    p.add_argument("--caw-params", default=None)
    _add_bench_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("train-caw", help="fit the cross-attention module on seeded scenes")
    p.add_argument("--scenes", type=int, default=50)
    p.add_argument("--sources", type=int, default=5)
    p.add_argument("--rigs-per-scene", type=int, default=8)
    p.add_argument("--epochs", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--train-size", type=int, default=16, help="training render size")
    p.add_argument("--train-samples", type=int, default=32)
    p.add_argument("--out", required=True, help="trained module JSON")
    p.add_argument("--loss-out", required=True, help="per-epoch loss CSV")
    p.set_defaults(func=cmd_train_caw)

    p = sub.add_parser("gradcheck", help="verify analytic gradients against finite differences")
    p.add_argument("--corrupt-gradients", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("report", help="aggregate experiment CSVs into a summary and figures")
    p.add_argument("--csv", action="append", required=True, help="experiment CSV (repeatable)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--loss-csv", default=None, help="train-caw loss CSV for a loss-curve figure")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
