"""Shared argument handling for the experiment scripts."""

import argparse
import json
import sys

from vsumeval.cli import _resolve
from vsumeval.ingest import SynthConfig, load_dataset, synth_dataset


def base_parser(description: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--dataset", default=None, help="dataset JSON or TVSum TSV; a synthetic bundle is used when omitted")
    p.add_argument("--meta", default=None, help="videos.json sidecar for a TSV dataset")
    p.add_argument("--synth-videos", type=int, default=10, help="synthetic bundle size when --dataset is omitted")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None, help="output path (printed to stdout when omitted)")
    return p


def load(args):
    if args.dataset:
        return load_dataset(_resolve(args.dataset), args.meta)
    return synth_dataset(SynthConfig(n_videos=args.synth_videos, seed=args.seed))


def emit(text: str, out) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        print(f"wrote {out}", file=sys.stderr)
    else:
        sys.stdout.write(text)


def echo(args) -> None:
    print(json.dumps({"args": vars(args)}, sort_keys=True), file=sys.stderr)
