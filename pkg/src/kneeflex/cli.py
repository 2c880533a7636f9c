"""Command-line interface.

Subcommands: generate, train, eval, predict, angle, experiment. All
randomness flows from --seed; reruns with identical argv produce identical
artifacts. Exit codes: 0 success, 2 usage/config error, 3 I/O or runtime
failure. No subcommand writes outside its --out directory.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .augment import BackgroundPool, prepare_backgrounds
from .dataset import SceneConfig, generate_dataset, load_dataset, load_png, save_png
from .errors import CheckpointFormatError, ConfigError, FramingError, ProjectionError
from .experiments import ValidationSpec, build_validation, run_experiments
from .goniometry import annotate, flexion_angle, predict
from .labels import KeypointLabel
from .network import Network
from .scene import BodyConfig
from .training import TrainConfig, evaluate, load_checkpoint, save_checkpoint, train, write_history_csv


def _common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=0, help="master seed (default: 0)")
    sub.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub.add_argument(
        "--threads",
        type=int,
        default=int(os.environ.get("GONIO_THREADS", "1")),
        help="worker parallelism (default: 1, or GONIO_THREADS)",
    )


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _load_pool(args) -> BackgroundPool | None:
    if getattr(args, "backgrounds", None) is None:
        return None
    return prepare_backgrounds(args.backgrounds)


def cmd_generate(args) -> int:
    config = SceneConfig(
        flexion_range=(args.flex_min, args.flex_max),
        max_offset_deg=args.max_offset,
        both_legs=args.both_legs,
        skin_mode=args.skin,
        body=BodyConfig(both_legs=args.both_legs),
    )
    generate_dataset(config, args.n, args.seed, args.out, threads=args.threads)
    _say(args, f"wrote {args.n} samples to {args.out}")
    return 0


def cmd_train(args) -> int:
    samples = load_dataset(args.data)
    pool = _load_pool(args)
    spec = ValidationSpec(
        n_single=args.val_single,
        n_varied=args.val_varied,
        real_dir=args.val_real,
        scenario=args.scenario,
    )
    validation = build_validation(spec, args.seed, pool) if (spec.n_single or spec.n_varied or spec.real_dir) else None
    config = TrainConfig(
        scenario=args.scenario,
        epochs=args.epochs,
        batch_size=args.batch,
        seed=args.seed,
        lr=args.lr,
        backgrounds=pool,
        validation=validation,
    )
    result = train(samples, config)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_history_csv(out / "history.csv", result.history)
    save_checkpoint(
        result.network,
        out / "eva.ckpt",
        epoch=max(result.best_epoch, 0),
        scenario=args.scenario,
        seed=args.seed,
    )
    _say(args, f"min train loss {result.min_train_loss():.3f}, min val loss {result.min_val_loss():.3f}")
    _say(args, f"wrote {out / 'eva.ckpt'} and {out / 'history.csv'}")
    return 0


def cmd_eval(args) -> int:
    net, _ = load_checkpoint(args.ckpt)
    samples = load_dataset(args.data)
    result = evaluate(net, samples)
    print(f"mean_loss {result.mean_loss:.4f}")
    for name, err in zip(("thigh", "knee", "leg"), result.per_point_error):
        print(f"{name}_error {err:.4f}")
    return 0


def cmd_predict(args) -> int:
    net, _ = load_checkpoint(args.ckpt)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["img,thigh_x,thigh_y,knee_x,knee_y,leg_x,leg_y,angle_deg"]
    for image_path in args.image:
        image = load_png(image_path)
        label = predict(net, image)
        angle = flexion_angle(label)
        stem = Path(image_path).stem
        coords = ",".join(f"{v:.2f}" for v in label.as_vector())
        lines.append(f"{stem},{coords},{angle:.2f}")
        if args.annotate:
            save_png(annotate(image, label), out / f"{stem}_annotated.png")
        _say(args, f"{stem}: angle {angle:.2f} deg")
    with open(out / "predictions.csv", "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    return 0


def cmd_angle(args) -> int:
    parts = args.points.split(",")
    if len(parts) != 6:
        raise ConfigError("--points expects 6 comma-separated numbers x1,y1,x2,y2,x3,y3")
    try:
        vec = [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"malformed --points: {exc}") from exc
    print(f"{flexion_angle(KeypointLabel.from_vector(vec)):.2f}")
    return 0


def cmd_experiment(args) -> int:
    if args.scenarios.strip().lower() == "all":
        scenarios = list(range(1, 9))
    else:
        try:
            scenarios = [int(s) for s in args.scenarios.split(",") if s.strip()]
        except ValueError as exc:
            raise ConfigError(f"malformed --scenarios: {exc}") from exc
    samples = load_dataset(args.data)
    pool = _load_pool(args)
    if pool is None and any(s in (4, 8) for s in scenarios):
        raise ConfigError("scenarios 4 and 8 require --backgrounds")
    spec = ValidationSpec(n_single=args.val_single, n_varied=args.val_varied, real_dir=args.val_real)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = run_experiments(
        scenarios,
        samples,
        seed=args.seed,
        epochs=args.epochs,
        batch_size=args.batch,
        lr=args.lr,
        pool=pool,
        validation_spec=spec,
        on_result=lambda o: _say(
            args, f"scenario {o.scenario}: train {o.min_train_loss:.3f}, val {o.min_val_loss:.3f}"
        ),
    )
    report.write(out / "report.csv")
    _say(args, f"wrote {out / 'report.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kneeflex",
        description="Synthetic leg datasets, keypoint CNN training, and knee goniometry.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="render a labeled synthetic dataset")
    p.add_argument("--n", type=int, required=True, help="number of samples")
    p.add_argument("--flex-min", type=float, default=0.0, help="min knee flexion, degrees (default: 0)")
    p.add_argument("--flex-max", type=float, default=140.0, help="max knee flexion, degrees (default: 140)")
    p.add_argument("--max-offset", type=float, default=10.0, help="max camera rotation offset, degrees (default: 10)")
    p.add_argument("--both-legs", action="store_true", help="render a resting second leg")
    p.add_argument("--skin", choices=("original", "varied"), default="original", help="skin tone mode (default: original)")
    p.add_argument("--out", required=True, help="output dataset directory")
    _common_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train Eva on a generated dataset")
    p.add_argument("--data", required=True, help="dataset directory (PNGs + labels.csv)")
    p.add_argument("--scenario", type=int, default=1, choices=range(1, 9), help="augmentation scenario 1..8 (default: 1)")
    p.add_argument("--epochs", type=int, default=50, help="epoch budget (default: 50)")
    p.add_argument("--batch", type=int, default=32, help="mini-batch size (default: 32)")
    p.add_argument("--lr", type=float, default=0.001, help="RMSProp learning rate (default: 0.001)")
    p.add_argument("--backgrounds", default=None, help="background image directory (scenarios 4 and 8)")
    p.add_argument("--val-real", default=None, help="directory of labeled real photos to append to validation")
    p.add_argument("--val-single", type=int, default=25, help="synthetic single-leg validation samples (default: 25)")
    p.add_argument("--val-varied", type=int, default=425, help="synthetic varied-skin validation samples (default: 425)")
    p.add_argument("--out", required=True, help="output directory for checkpoint and history")
    _common_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a labeled dataset")
    p.add_argument("--ckpt", required=True, help="checkpoint file")
    p.add_argument("--data", required=True, help="dataset directory")
    _common_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="predict keypoints (and angles) for images")
    p.add_argument("--ckpt", required=True, help="checkpoint file")
    p.add_argument("--image", required=True, nargs="+", help="input image path(s)")
    p.add_argument("--annotate", action="store_true", help="write annotated PNGs with the red polyline")
    p.add_argument("--out", required=True, help="output directory")
    _common_flags(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("angle", help="flexion angle from six keypoint coordinates")
    p.add_argument("--points", required=True, help='comma list "x1,y1,x2,y2,x3,y3" (thigh, knee, leg)')
    _common_flags(p)
    p.set_defaults(func=cmd_angle)

    p = sub.add_parser("experiment", help="run the augmentation-scenario experiments")
    p.add_argument("--scenarios", default="all", help='comma list of scenario ids, or "all" (default)')
    p.add_argument("--data", required=True, help="training dataset directory")
    p.add_argument("--epochs", type=int, default=50, help="epoch budget per scenario (default: 50)")
    p.add_argument("--batch", type=int, default=32, help="mini-batch size (default: 32)")
    p.add_argument("--lr", type=float, default=0.001, help="RMSProp learning rate (default: 0.001)")
    p.add_argument("--backgrounds", default=None, help="background image directory (scenarios 4 and 8)")
    p.add_argument("--val-real", default=None, help="directory of labeled real photos")
    p.add_argument("--val-single", type=int, default=25, help="synthetic single-leg validation samples (default: 25)")
    p.add_argument("--val-varied", type=int, default=425, help="synthetic varied-skin validation samples (default: 425)")
    p.add_argument("--out", required=True, help="output directory for the report")
    _common_flags(p)
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, FramingError, ProjectionError, CheckpointFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
