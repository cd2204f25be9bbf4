"""F1 of random and leave-one-out human summaries for each segmentation method.

KTS rows are included only when the dataset carries per-frame features.
"""

from _common import base_parser, echo, emit, load

from vsumeval.harness import ExperimentConfig, reports_to_csv, run_experiment
from vsumeval.segmentation import make_segmenter

METHODS = ["uniform", "one-peak", "two-peak", "kts", "randomized-kts"]


def main():
    p = base_parser(__doc__.splitlines()[0])
    p.add_argument("--budget", type=float, default=0.15)
    p.add_argument("--pooling", default="mean", choices=["mean", "sum"])
    args = p.parse_args()
    echo(args)
    bundle = load(args)
    reports = []
    for method in METHODS:
        if method.endswith("kts") and not bundle.features:
            continue
        for scorer in ("random", "human"):
            cfg = ExperimentConfig(
                segmenter=make_segmenter(method),
                scorer=scorer,
                pooling=args.pooling,
                budget_fraction=args.budget,
                trials=args.trials,
                master_seed=args.seed,
            )
            reports.append(run_experiment(bundle, cfg, jobs=args.jobs))
    emit(reports_to_csv(reports), args.out)


if __name__ == "__main__":
    main()
