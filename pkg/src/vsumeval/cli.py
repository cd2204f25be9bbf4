"""Command-line entry point.

Exit codes: 0 success, 2 bad usage or bad data, 1 internal failure.
Relative ``--dataset`` paths that do not exist in the working directory
are looked up under ``$VSUMEVAL_DATA_ROOT``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .curves import annotator_curves, accumulate_curve, curve_bounds, emit_curves, mean_reference_scores, random_baseline
from .datamodel import DataError, validate_segmentation
from .harness import (
    ExperimentConfig,
    rank_results_to_csv,
    reports_to_csv,
    reports_to_json,
    run_budget_sweep,
    run_rank_eval,
)
from .ingest import SynthConfig, load_dataset, load_prediction_scores, synth_dataset, write_json_dataset
from .seeding import make_rng
from .segmentation import make_segmenter, segment, segment_kts, segmenter_to_dict, Kts, RandomizedKts

DATA_ROOT_ENV = "VSUMEVAL_DATA_ROOT"
METHODS = ["uniform", "one-peak", "two-peak", "kts", "randomized-kts"]


def _resolve(path: str) -> Path:
    p = Path(path)
    root = os.environ.get(DATA_ROOT_ENV)
    if not p.exists() and not p.is_absolute() and root:
        return Path(root) / p
    return p


def _echo(config: dict) -> None:
    print(json.dumps({"vsumeval": __version__, "config": config}, sort_keys=True), file=sys.stderr)


def _write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _add_dataset(p):
    p.add_argument("--dataset", required=True, help="neutral JSON dataset or TVSum-style TSV")
    p.add_argument("--meta", default=None, help="videos.json sidecar for a TSV dataset (default: next to the TSV)")


def _add_segmenter_flags(p, flag="--method", default="two-peak"):
    p.add_argument(flag, default=default, choices=METHODS, help="segmentation method (default: %(default)s)")
    p.add_argument("--seg-len", type=int, default=60, help="uniform segment length in frames (default: %(default)s)")
    p.add_argument("--lam", type=float, default=60.0, help="one-peak Poisson rate (default: %(default)s)")
    p.add_argument("--lambda-short", type=float, default=30.0, help="two-peak short rate (default: %(default)s)")
    p.add_argument("--lambda-long", type=float, default=90.0, help="two-peak long rate (default: %(default)s)")
    p.add_argument("--p-short", type=float, default=0.5, help="two-peak short-mode probability (default: %(default)s)")
    p.add_argument("--kts-penalty", type=float, default=1.0, help="KTS penalty constant (default: %(default)s)")
    p.add_argument("--kts-max-segments", type=int, default=50, help="KTS segment-count cap (default: %(default)s)")
    p.add_argument("--kts-min-len", type=int, default=1, help="KTS minimum segment length (default: %(default)s)")


def _segmenter_from(args, method):
    return make_segmenter(
        method,
        len_frames=args.seg_len,
        lam=args.lam,
        lambda_short=args.lambda_short,
        lambda_long=args.lambda_long,
        p_short=args.p_short,
        penalty_c=args.kts_penalty,
        max_segments=args.kts_max_segments,
        min_seg_len=args.kts_min_len,
    )


def _load(args):
    return load_dataset(_resolve(args.dataset), args.meta)


# ---------------------------------------------------------------- subcommands


def cmd_segment(args) -> int:
    bundle = _load(args)
    spec = _segmenter_from(args, args.method)
    config = {"command": "segment", "dataset": args.dataset, "segmenter": segmenter_to_dict(spec), "seed": args.seed}
    _echo(config)
    out = {}
    for video in bundle.videos:
        vid = video.video_id
        base = None
        if isinstance(spec, (Kts, RandomizedKts)):
            feats = (bundle.features or {}).get(vid)
            if feats is None:
                raise DataError(f"{vid}: --method {args.method} needs per-frame features, the dataset has none")
            kts = spec if isinstance(spec, Kts) else spec.base
            base = segment_kts(video, feats, kts.penalty_c, kts.max_segments, kts.min_seg_len)
        seg = segment(spec, video, rng=make_rng(args.seed, "segment", 0, vid), base=base)
        problems = validate_segmentation(seg, video)
        if problems:
            raise RuntimeError(f"{vid}: produced an invalid segmentation: {problems}")
        out[vid] = list(seg.boundaries)
    _write(args.out, json.dumps({"version": __version__, "config": config, "segmentations": out}, indent=1) + "\n")
    return 0


def cmd_randtest(args) -> int:
    bundle = _load(args)
    spec = _segmenter_from(args, args.segmenter)
    cfg = ExperimentConfig(
        segmenter=spec,
        scorer=args.scorer,
        pooling=args.pooling,
        budget_fraction=args.budget[0],
        trials=args.trials,
        master_seed=args.seed,
        mode=args.mode,
        ci_method=args.ci,
    )
    _echo({"command": "randtest", "dataset": args.dataset, "budgets": args.budget, **cfg.to_dict()})
    preds = None
    if args.scorer.startswith("file:"):
        preds = load_prediction_scores(_resolve(args.scorer.split(":", 1)[1]), bundle)
    reports = run_budget_sweep(bundle, cfg, args.budget, predictions=preds, jobs=args.jobs)
    out = Path(args.out)
    _write(out, reports_to_json(reports) + "\n")
    _write(out.with_suffix(".csv"), reports_to_csv(reports))
    return 0


def cmd_rankeval(args) -> int:
    bundle = _load(args)
    if args.pred:
        mode, preds = "pred", load_prediction_scores(_resolve(args.pred), bundle)
        label = Path(args.pred).stem
    else:
        mode, preds, label = ("loo" if args.loo else "random"), None, None
    config = {"command": "rankeval", "dataset": args.dataset, "mode": mode, "pred": args.pred, "trials": args.trials, "seed": args.seed}
    _echo(config)
    result = run_rank_eval(bundle, mode, preds, args.trials, args.seed, args.jobs, label)
    out = Path(args.out)
    _write(out, rank_results_to_csv([result]))
    doc = result.to_dict()
    doc["config"] = {**config, **doc["config"]}
    _write(out.with_suffix(".json"), json.dumps(doc, indent=1) + "\n")
    return 0


def cmd_curve(args) -> int:
    bundle = _load(args)
    preds = []
    for path in args.pred or []:
        preds.append((Path(path).stem, load_prediction_scores(_resolve(path), bundle)))
    vids = [args.video] if args.video else [v for v in bundle.video_ids if v in bundle.annotations]
    for vid in vids:
        bundle.video(vid)
        if vid not in bundle.annotations:
            raise DataError(f"{vid}: no annotator scores to build curves from")
    config = {"command": "curve", "dataset": args.dataset, "pred": args.pred, "videos": vids, "format": args.format}
    _echo(config)
    out = Path(args.out)
    single_file = args.video is not None and out.suffix.lower() in (".csv", ".svg")
    if not single_file:
        out.mkdir(parents=True, exist_ok=True)
    for vid in vids:
        ann = bundle.annotations[vid]
        ref = mean_reference_scores(ann)
        curves = [accumulate_curve(p[vid], ref, label) for label, p in preds]
        if len(ann) >= 2:
            curves += annotator_curves(ann)
        target = out if single_file else out / f"{vid}.{args.format}"
        emit_curves(
            curves,
            curve_bounds(ref),
            random_baseline(ann.n_frames, vid),
            target,
            args.format,
            title=vid,
            description=json.dumps({"vsumeval": __version__, "config": config}, sort_keys=True),
        )
    return 0


def cmd_synth(args) -> int:
    doc = json.loads(_resolve(args.config).read_text(encoding="utf-8")) if args.config else {}
    if args.seed is not None:
        doc["seed"] = args.seed
    cfg = SynthConfig.from_dict(doc)
    _echo({"command": "synth", **cfg.to_dict()})
    write_json_dataset(synth_dataset(cfg), args.out)
    return 0


def cmd_validate(args) -> int:
    bundle = _load(args)
    summary = {
        "videos": len(bundle.videos),
        "annotated_videos": len(bundle.annotations),
        "annotators": {vid: len(a) for vid, a in bundle.annotations.items()},
        "reference_masks": {vid: len(m) for vid, m in (bundle.reference_masks or {}).items()},
        "features": {vid: list(f.shape) for vid, f in (bundle.features or {}).items()},
    }
    _echo({"command": "validate", "dataset": args.dataset})
    print(json.dumps(summary, indent=1))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vsumeval", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"vsumeval {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("segment", help="segment every video in a dataset", formatter_class=fmt)
    _add_dataset(p)
    _add_segmenter_flags(p)
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--out", required=True, help="output JSON path")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("randtest", help="randomization test (F1 against references)", formatter_class=fmt)
    _add_dataset(p)
    _add_segmenter_flags(p, "--segmenter")
    p.add_argument("--scorer", default="random", help="random | human | annotator:K | file:PATH")
    p.add_argument("--pooling", default="mean", choices=["mean", "sum"], help="segment score pooling")
    p.add_argument("--budget", type=float, nargs="+", default=[0.15], help="summary length fraction(s)")
    p.add_argument("--trials", type=int, default=100, help="number of seeded trials")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--mode", default="auto", choices=["auto", "tvsum", "summe"], help="reference protocol")
    p.add_argument("--ci", default="normal", choices=["normal", "bootstrap"], help="confidence interval method")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (output does not depend on it)")
    p.add_argument("--out", required=True, help="report JSON path; the CSV table is written next to it")
    p.set_defaults(func=cmd_randtest)

    p = sub.add_parser("rankeval", help="Kendall tau-b / Spearman rho against annotators", formatter_class=fmt)
    _add_dataset(p)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--pred", help="prediction scores JSON")
    group.add_argument("--random", action="store_true", help="uniform random scores")
    group.add_argument("--loo", action="store_true", help="each annotator against the rest")
    p.add_argument("--trials", type=int, default=100, help="random-score trials")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out", required=True, help="CSV path; a JSON echo is written next to it")
    p.set_defaults(func=cmd_rankeval)

    p = sub.add_parser("curve", help="accumulated-score correlation curves", formatter_class=fmt)
    _add_dataset(p)
    p.add_argument("--pred", action="append", help="prediction scores JSON (repeatable)")
    p.add_argument("--video", default=None, help="single video id (default: every annotated video)")
    p.add_argument("--format", default="csv", choices=["csv", "svg"], help="output format")
    p.add_argument("--out", required=True, help="output directory, or a file path with --video")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("synth", help="write a synthetic dataset", formatter_class=fmt)
    p.add_argument("--config", default=None, help="SynthConfig JSON (default: built-in defaults)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", required=True, help="output dataset JSON")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", help="load and check a dataset", formatter_class=fmt)
    _add_dataset(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataError, ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"vsumeval {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - exit-code contract
        print(f"vsumeval {args.command}: internal error: {exc!r}", file=sys.stderr)
        return 1
