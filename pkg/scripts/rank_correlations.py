"""Kendall tau-b and Spearman rho against annotators: random, human LOO and prediction files."""

from pathlib import Path

from _common import base_parser, echo, emit, load

from vsumeval.harness import rank_results_to_csv, run_rank_eval
from vsumeval.ingest import load_prediction_scores


def main():
    p = base_parser(__doc__)
    p.add_argument("--pred", action="append", default=[], help="prediction scores JSON (repeatable)")
    args = p.parse_args()
    echo(args)
    bundle = load(args)
    results = [
        run_rank_eval(bundle, "random", trials=args.trials, master_seed=args.seed, jobs=args.jobs),
        run_rank_eval(bundle, "loo", jobs=args.jobs),
    ]
    for path in args.pred:
        preds = load_prediction_scores(path, bundle)
        results.append(run_rank_eval(bundle, "pred", preds, jobs=args.jobs, label=Path(path).stem))
    emit(rank_results_to_csv(results), args.out)


if __name__ == "__main__":
    main()
