"""Random and human F1 at 15%, 25% and 35% summary budgets for each segmentation method."""

from _common import base_parser, echo, emit, load

from vsumeval.harness import ExperimentConfig, reports_to_csv, run_budget_sweep
from vsumeval.segmentation import make_segmenter


def main():
    p = base_parser(__doc__)
    p.add_argument("--budgets", type=float, nargs="+", default=[0.15, 0.25, 0.35])
    args = p.parse_args()
    echo(args)
    bundle = load(args)
    reports = []
    for method in ["uniform", "one-peak", "two-peak", "kts", "randomized-kts"]:
        if method.endswith("kts") and not bundle.features:
            continue
        for scorer in ("random", "human"):
            cfg = ExperimentConfig(segmenter=make_segmenter(method), scorer=scorer, trials=args.trials, master_seed=args.seed)
            reports.extend(run_budget_sweep(bundle, cfg, args.budgets, jobs=args.jobs))
    emit(reports_to_csv(reports), args.out)


if __name__ == "__main__":
    main()
