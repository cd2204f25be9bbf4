"""Segment lengths chosen by the knapsack under random scores, per pooling mode."""

import json

from _common import base_parser, echo, emit, load

from vsumeval.harness import ExperimentConfig, run_selection_bias
from vsumeval.segmentation import make_segmenter


def main():
    p = base_parser(__doc__)
    p.add_argument("--segmenter", default="two-peak", choices=["uniform", "one-peak", "two-peak", "kts", "randomized-kts"])
    p.add_argument("--budget", type=float, default=0.15)
    args = p.parse_args()
    echo(args)
    bundle = load(args)
    out = {}
    for pooling in ("mean", "sum"):
        cfg = ExperimentConfig(
            segmenter=make_segmenter(args.segmenter),
            pooling=pooling,
            budget_fraction=args.budget,
            trials=args.trials,
            master_seed=args.seed,
        )
        res = run_selection_bias(bundle, cfg, jobs=args.jobs)
        res.pop("per_pair_share_of_short")
        out[pooling] = res
    emit(json.dumps({"config": vars(args), "results": out}, indent=1) + "\n", args.out)


if __name__ == "__main__":
    main()
