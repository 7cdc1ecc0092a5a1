"""``uaseg`` command line: one subcommand per batch stage.

Exit status is 0 on success, 1 for invalid arguments and 2 for data errors.
Logs go to stderr; results only to files.
"""
from __future__ import annotations

import argparse
import json
import logging
import secrets
import sys
from pathlib import Path

from .core import EmptyReportError, InvalidInputError, InvalidParameterError, NumericError
from .losses import LossConfig
from .masks import load_palette
from .metrics import Summary, compare
from . import pipeline, synthetic, toy

log = logging.getLogger("uaseg")

SUBCOMMANDS = ("weather", "deform", "palette-split", "crop-instances", "eval", "compare",
               "uncertainty", "train-toy", "pipeline")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _seed_arg(p):
    p.add_argument("--seed", type=int, default=None, help="master seed (u64); generated and logged if omitted")


def _jobs_arg(p):
    p.add_argument("--jobs", type=int, default=None, help="worker processes (outputs do not depend on this)")


def _strength(text):
    if text == "random":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a float or 'random', got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="uaseg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("weather", help="apply fog/rain/snow corruption to a PNG directory")
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--output", required=True, type=Path)
    p.add_argument("--kind", choices=["fog", "rain", "snow", "random"], default="random")
    p.add_argument("--strength", type=_strength, default="random")
    _seed_arg(p)
    _jobs_arg(p)

    p = sub.add_parser("deform", help="elastically deform label rasters")
    p.add_argument("--labels", required=True, type=Path)
    p.add_argument("--output", required=True, type=Path)
    p.add_argument("--preset", choices=["fog", "rain", "snow", "all"], default="all")
    p.add_argument("--alpha", type=float, default=None, help="override the preset displacement peak")
    p.add_argument("--sigma", type=float, default=None, help="override the preset smoothing std")
    _seed_arg(p)
    _jobs_arg(p)

    p = sub.add_parser("palette-split", help="split colour labels into per-class binary masks")
    p.add_argument("--labels", required=True, type=Path)
    p.add_argument("--palette", type=Path, default=None, help="r,g,b,name CSV (default: CamVid)")
    p.add_argument("--output", required=True, type=Path)
    _jobs_arg(p)

    p = sub.add_parser("crop-instances", help="crop connected components of one class")
    p.add_argument("--labels", required=True, type=Path)
    p.add_argument("--images", type=Path, default=None)
    p.add_argument("--palette", type=Path, default=None)
    p.add_argument("--class", dest="class_name", default="Car")
    p.add_argument("--min-area", type=int, default=64)
    p.add_argument("--pad", type=int, default=8)
    p.add_argument("--output", required=True, type=Path)
    _jobs_arg(p)

    p = sub.add_parser("eval", help="per-class IoU/Dice of predicted vs ground-truth label rasters")
    p.add_argument("--pred", required=True, type=Path)
    p.add_argument("--gt", required=True, type=Path)
    p.add_argument("--palette", type=Path, default=None)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--include-empty", action="store_true", help="average both-empty pairs in as 1.0")
    _jobs_arg(p)

    p = sub.add_parser("compare", help="percent change of summary A over baseline B")
    p.add_argument("--a", required=True, type=Path)
    p.add_argument("--b", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("uncertainty", help="render the std map of probability sample PNGs")
    p.add_argument("--samples", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("train-toy", help="train the toy head on a synthetic task")
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--mc-samples", type=int, default=None)
    p.add_argument("--noise-rate", type=float, default=None)
    p.add_argument("--task", choices=["disc", "two-class"], default=None)
    p.add_argument("--images", type=int, default=None)
    p.add_argument("--size", type=int, default=None)
    _seed_arg(p)
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("pipeline", help="corrupt -> deform -> split -> crop -> eval over a corpus")
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--input", type=Path, default=None, help="clean image directory")
    p.add_argument("--labels", type=Path, default=None, help="label raster directory")
    p.add_argument("--output", type=Path, default=None)
    p.add_argument("--palette", type=Path, default=None)
    p.add_argument("--kind", choices=["fog", "rain", "snow", "random"], default=None)
    p.add_argument("--strength", type=_strength, default=None)
    p.add_argument("--presets", default=None, help="comma separated subset of fog,rain,snow")
    p.add_argument("--class", dest="class_name", default=None)
    p.add_argument("--min-area", type=int, default=None)
    p.add_argument("--pad", type=int, default=None)
    _seed_arg(p)
    _jobs_arg(p)
    return parser


def _seed(args):
    if args.seed is None:
        args.seed = secrets.randbits(63)
        log.warning("no --seed given; using --seed %d", args.seed)
    if not 0 <= args.seed < 2**64:
        raise UsageError("--seed must be an unsigned 64-bit integer")
    return args.seed


def _jobs(args, config=None):
    jobs = args.jobs if args.jobs is not None else (config or {}).get("jobs", 1)
    if jobs < 1:
        raise UsageError("--jobs must be >= 1")
    return jobs


def _load_config(path):
    if path is None:
        return {}
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    loss = cfg.pop("loss", {})
    return {**cfg, **loss}


def _pick(args, config, key, default, dest=None):
    value = getattr(args, dest or key)
    if value is not None:
        return value
    return config.get(key, default)


def cmd_weather(args):
    seed = _seed(args)
    pipeline.run_weather(args.input, args.output, args.kind, args.strength, seed, _jobs(args))


def cmd_deform(args):
    seed = _seed(args)
    presets = ("fog", "rain", "snow") if args.preset == "all" else (args.preset,)
    pipeline.run_deform(args.labels, args.output, presets, seed, args.alpha, args.sigma, _jobs(args))


def cmd_palette_split(args):
    pipeline.run_split(args.labels, args.output, load_palette(args.palette), _jobs(args))


def cmd_crop(args):
    pipeline.run_crop(args.labels, args.output, load_palette(args.palette), args.class_name,
                      args.min_area, args.pad, args.images, _jobs(args))


def cmd_eval(args):
    _, summary = pipeline.run_eval(args.pred, args.gt, load_palette(args.palette), args.out,
                                   args.epsilon, _jobs(args), args.include_empty)
    log.info("overall iou %.4f dice %.4f over %d pairs", summary.overall_iou, summary.overall_dice, summary.count)


def cmd_compare(args):
    report = compare(Summary.load(args.a), Summary.load(args.b))
    args.out.parent.mkdir(parents=True, exist_ok=True)
    report.save(args.out)
    log.info("mean change iou %.2f%% dice %.2f%%", report.mean_change_iou, report.mean_change_dice)


def cmd_uncertainty(args):
    _, stats = pipeline.render_uncertainty(args.samples, args.out)
    log.info("U mean %.4f max %.4f", stats["mean"], stats["max"])


def cmd_train_toy(args):
    config = _load_config(args.config)
    if args.seed is None and "seed" in config:
        args.seed = config["seed"]
    seed = _seed(args)
    loss = LossConfig(
        alpha=_pick(args, config, "alpha", 0.5),
        beta=_pick(args, config, "beta", 0.1),
        epsilon=_pick(args, config, "epsilon", 1e-6),
        mc_samples=_pick(args, config, "mc_samples", 10),
    )
    cfg = toy.TrainConfig(
        steps=_pick(args, config, "steps", 200),
        learning_rate=_pick(args, config, "lr", 0.5),
        loss=loss,
        seed=seed,
    )
    task = _pick(args, config, "task", "disc")
    n_images = _pick(args, config, "images", 4)
    size = _pick(args, config, "size", 32)
    make = synthetic.disc_task if task == "disc" else synthetic.two_class_task
    data = make(n_images, size, seed)
    head = toy.ToyHead.init(data[0][1].shape[0], seed, _pick(args, config, "noise_rate", 0.2, "noise_rate"))
    trained, trace = toy.train(head, data, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    toy.write_trace(out / "trace.csv", trace)
    trained.save(out)
    result = {
        "final_total": trace[-1][1].total,
        "soft_iou": toy.evaluate_soft_iou(trained, data, loss.epsilon),
        "steps": cfg.steps,
        "seed": seed,
    }
    (out / "summary.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    log.info("trained %d steps; soft IoU %.4f", cfg.steps, result["soft_iou"])


def cmd_pipeline(args):
    config = _load_config(args.config)
    if args.seed is None and "seed" in config:
        args.seed = config["seed"]
    seed = _seed(args)
    paths = {}
    for key, dest in (("input_dir", "input"), ("labels_dir", "labels"), ("output_dir", "output")):
        value = getattr(args, dest) or config.get(key) or config.get(dest)
        if value is None:
            raise UsageError(f"--{dest} is required")
        paths[key] = Path(value)
    presets = _pick(args, config, "presets", "fog,rain,snow")
    if isinstance(presets, str):
        presets = [p.strip() for p in presets.split(",") if p.strip()]
    palette_path = args.palette or config.get("palette")
    cfg = pipeline.PipelineConfig(
        palette=load_palette(palette_path),
        kind=_pick(args, config, "kind", "random"),
        strength=_pick(args, config, "strength", "random"),
        presets=tuple(presets),
        seed=seed,
        loss=LossConfig(**{k: config[k] for k in ("alpha", "beta", "epsilon", "mc_samples") if k in config}),
        class_name=_pick(args, config, "class", "Car", "class_name"),
        min_area=_pick(args, config, "min_area", 64),
        pad=_pick(args, config, "pad", 8),
        jobs=_jobs(args, config),
        **paths,
    )
    summary = pipeline.run_pipeline(cfg)
    log.info("annotation agreement iou %.4f dice %.4f", summary.overall_iou, summary.overall_dice)


COMMANDS = {
    "weather": cmd_weather,
    "deform": cmd_deform,
    "palette-split": cmd_palette_split,
    "crop-instances": cmd_crop,
    "eval": cmd_eval,
    "compare": cmd_compare,
    "uncertainty": cmd_uncertainty,
    "train-toy": cmd_train_toy,
    "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        COMMANDS[args.command](args)
    except (UsageError, InvalidParameterError) as exc:
        log.error("%s", exc)
        return 1
    except (InvalidInputError, EmptyReportError, NumericError, OSError, KeyError, ValueError) as exc:
        log.error("%s", exc)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
