"""Command-line interface: train | evaluate | predict | sweep | synth.

Exit codes: 0 success, 2 config error, 3 data error.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import pipeline
from .errors import ConfigError, DataError
from .pipeline import PipelineConfig, load_config, parse_config


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (flags below override it)")
    p.add_argument("--task", choices=["va", "expr", "au"], help="task to run")
    p.add_argument("--features", help="feature interchange file")
    p.add_argument("--labels", help="label directory")
    p.add_argument("--out", help="output directory (default '.')")
    p.add_argument("--seed", type=int, help="seed for training and generation")
    p.add_argument("--selector", choices=["logits_va", "embeddings", "embeddings_plus_logits"])
    p.add_argument("--k", type=int, help="smoothing kernel half-width")
    p.add_argument("--blend-weight", type=float, help="weight on the first blend member")
    p.add_argument("--thresholds", choices=["fixed", "search"],
                   help="AU thresholding mode (default fixed 0.5)")
    p.add_argument("--external", help="external 'scores' prediction file to blend with")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="affectkit",
        description="Frame-level video affect pipeline: train heads on "
                    "precomputed facial features, then blend, smooth, "
                    "threshold, and evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a task head")
    _add_common(p)
    p.add_argument("--member", choices=["mlp", "linear"],
                   help="head family: mlp (default) or the L2 linear blend partner")

    p = sub.add_parser("evaluate", help="evaluate one model, a blend, or a prediction file")
    _add_common(p)
    p.add_argument("--model", action="append", default=[],
                   help="model file; repeat for a two-member blend")
    p.add_argument("--pred", help="evaluate a 'final' prediction file instead of a model")

    p = sub.add_parser("predict", help="write per-frame predictions")
    _add_common(p)
    p.add_argument("--model", action="append", default=[], help="model file")
    p.add_argument("--kind", choices=["final", "scores"], default="final",
                   help="final (post-processed) or raw scores for blending")

    p = sub.add_parser("sweep", help="metric curve over k, blend_weight, or au_threshold_grid")
    _add_common(p)
    p.add_argument("--model", action="append", default=[], help="model file")
    p.add_argument("--param", required=True,
                   choices=["k", "blend_weight", "au_threshold_grid"])
    p.add_argument("--values", required=True,
                   help="comma-separated values, e.g. 0,5,15,25,50,100,200")

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    _add_common(p)
    p.add_argument("--n-videos", type=int, default=8)
    p.add_argument("--frames-per-video", type=int, default=400)
    p.add_argument("--noise-sigma", type=float, default=0.5)

    return parser


def _merge_config(args: argparse.Namespace) -> PipelineConfig:
    doc = {}
    if args.config:
        cfg = load_config(args.config)
        doc = {
            "task": cfg.task.value, "selector": cfg.selector.kind,
            "features": cfg.features, "labels": cfg.labels, "out": cfg.out,
            "seed": cfg.seed, "member": cfg.member, "val_fraction": cfg.val_fraction,
            "train": {k: v for k, v in cfg.train.__dict__.items()},
            "post": {k: v for k, v in cfg.post.__dict__.items()},
        }
    for key in ("task", "features", "labels", "out", "seed", "selector"):
        val = getattr(args, key, None)
        if val is not None:
            doc[key] = val
    if getattr(args, "member", None):
        doc["member"] = args.member
    post = doc.setdefault("post", {})
    if getattr(args, "k", None) is not None:
        post["k"] = args.k
    if getattr(args, "blend_weight", None) is not None:
        post["blend_weight"] = args.blend_weight
    if getattr(args, "thresholds", None):
        post["thresholds"] = args.thresholds
    if getattr(args, "external", None):
        post["external"] = args.external
    return parse_config(doc)


def _parse_values(raw: str, param: str):
    try:
        if param == "k":
            return [int(v) for v in raw.split(",") if v != ""]
        return [float(v) for v in raw.split(",") if v != ""]
    except ValueError:
        raise ConfigError(f"cannot parse sweep values {raw!r}") from None


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _merge_config(args)
        if args.command == "train":
            path = pipeline.cmd_train(cfg)
            print(path)
        elif args.command == "evaluate":
            if args.pred:
                report = pipeline.cmd_evaluate_file(cfg, args.pred)
            else:
                report = pipeline.cmd_evaluate(cfg, args.model)
            print(json.dumps(report, sort_keys=True, indent=2))
        elif args.command == "predict":
            print(pipeline.cmd_predict(cfg, args.model, kind=args.kind))
        elif args.command == "sweep":
            values = _parse_values(args.values, args.param)
            print(pipeline.cmd_sweep(cfg, args.param, values, args.model))
        elif args.command == "synth":
            feat, lab = pipeline.cmd_synth(cfg, args.n_videos,
                                           args.frames_per_video, args.noise_sigma)
            print(feat)
            print(lab)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    return 0


def main() -> None:
    sys.exit(run())
