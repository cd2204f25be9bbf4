"""Randomization tests and rank-correlation evaluations over a dataset.

Every random draw is keyed by ``(master_seed, purpose, trial, video_id)``,
so per-video work can run in any order or in parallel and the assembled
report is the same. Adding trials never changes the earlier ones.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .datamodel import AnnotationSet, DataError, FrameScores, VideoRecord, mask_from_segments
from .ingest import DatasetBundle, load_prediction_scores
from .metrics import RankReference, f1_matrix, loo_f1_arrays
from .seeding import make_rng
from .segmentation import (
    Kts,
    RandomizedKts,
    SegmenterSpec,
    TwoPeak,
    is_stochastic,
    segment,
    segment_kts,
    segmenter_name,
    segmenter_to_dict,
)
from .selection import budget_frames, knapsack_indices, pool_matrix, pool_scores, selected_length_stats

Z_95 = 1.96


@dataclass(frozen=True)
class ExperimentConfig:
    """One randomization experiment.

    ``scorer`` is ``"random"``, ``"human"`` (leave-one-out human baseline),
    ``"annotator:K"`` (annotator K's scores against the others) or
    ``"file:PATH"`` (externally produced frame scores). ``mode`` picks the
    reference protocol: ``"tvsum"`` regenerates references from annotator
    scores for every segmentation, ``"summe"`` uses the stored masks,
    ``"auto"`` prefers stored masks when the bundle has them.
    """

    segmenter: SegmenterSpec = TwoPeak()
    scorer: str = "random"
    pooling: str = "mean"
    budget_fraction: float = 0.15
    trials: int = 100
    master_seed: int = 0
    aggregation: str = "both"
    mode: str = "auto"
    ci_method: str = "normal"

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0.0 < self.budget_fraction <= 1.0:
            raise ValueError("budget_fraction must lie in (0, 1]")
        if self.pooling not in ("mean", "sum"):
            raise ValueError("pooling must be 'mean' or 'sum'")
        if self.aggregation not in ("avg", "max", "both"):
            raise ValueError("aggregation must be avg, max or both")
        if self.mode not in ("auto", "tvsum", "summe"):
            raise ValueError("mode must be auto, tvsum or summe")
        if self.ci_method not in ("normal", "bootstrap"):
            raise ValueError("ci_method must be normal or bootstrap")
        kind = self.scorer.split(":", 1)[0]
        if kind not in ("random", "human", "annotator", "file"):
            raise ValueError(f"unknown scorer {self.scorer!r}")
        if kind == "annotator":
            int(self.scorer.split(":", 1)[1])

    def to_dict(self) -> dict:
        return {
            "segmenter": segmenter_to_dict(self.segmenter),
            "scorer": self.scorer,
            "pooling": self.pooling,
            "budget_fraction": self.budget_fraction,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "aggregation": self.aggregation,
            "mode": self.mode,
            "ci_method": self.ci_method,
        }


@dataclass(frozen=True)
class ConfidenceInterval:
    mean: float
    half_width_95: float


def confidence_interval(samples, method: str = "normal", seed: int = 0) -> ConfidenceInterval:
    """Mean and 95% half-width: ``1.96 * sd / sqrt(n)``, or half the
    2.5-97.5 percentile range of bootstrap means."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("need at least one sample")
    mean = float(x.mean())
    if x.size == 1:
        return ConfidenceInterval(mean, 0.0)
    if method == "bootstrap":
        rng = make_rng(seed, "bootstrap")
        means = x[rng.integers(0, x.size, (2000, x.size))].mean(axis=1)
        lo, hi = np.percentile(means, [2.5, 97.5])
        return ConfidenceInterval(mean, float((hi - lo) / 2))
    # n-denominator standard deviation: (0, 1) gives 1.96 * 0.5 / sqrt(2)
    return ConfidenceInterval(mean, float(Z_95 * x.std() / math.sqrt(x.size)))


def random_frame_scores(video: VideoRecord, rng: np.random.Generator) -> FrameScores:
    return FrameScores(video.video_id, rng.random(video.n_frames))


@dataclass
class ExperimentReport:
    method: str
    segmenter: str
    budget_fraction: float
    config: dict
    seed: int
    per_video: dict
    avg_f1: float
    max_f1: float
    avg_f1_ci: float
    max_f1_ci: float
    trial_avg_f1: list
    trial_max_f1: list
    bias: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "version": __version__,
            "method": self.method,
            "segmenter": self.segmenter,
            "budget_fraction": self.budget_fraction,
            "config": self.config,
            "seed": self.seed,
            "avg_f1": self.avg_f1,
            "avg_f1_ci": self.avg_f1_ci,
            "max_f1": self.max_f1,
            "max_f1_ci": self.max_f1_ci,
            "trial_avg_f1": self.trial_avg_f1,
            "trial_max_f1": self.trial_max_f1,
            "bias": self.bias,
            "per_video": self.per_video,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def csv_row(self) -> list:
        return [self.method, self.segmenter, self.budget_fraction, self.avg_f1, self.avg_f1_ci, self.max_f1, self.max_f1_ci]


REPORT_CSV_HEADER = ["method", "segmenter", "budget", "avg_f1", "avg_f1_ci", "max_f1", "max_f1_ci"]


def reports_to_csv(reports: Sequence[ExperimentReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_CSV_HEADER)
    for r in reports:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in r.csv_row()])
    return buf.getvalue()


def reports_to_json(reports: Sequence[ExperimentReport]) -> str:
    return json.dumps({"version": __version__, "reports": [r.to_dict() for r in reports]}, indent=1)


# ---------------------------------------------------------------- per-video work


@dataclass
class _VideoTask:
    video: VideoRecord
    cfg: ExperimentConfig
    mode: str
    annotations: Optional[np.ndarray]
    references: Optional[np.ndarray]
    features: Optional[np.ndarray]
    prediction: Optional[np.ndarray]
    bias_only: bool = False


def _resolve_mode(bundle: DatasetBundle, cfg: ExperimentConfig) -> str:
    mode = cfg.mode
    if mode == "auto":
        mode = "summe" if bundle.reference_masks else "tvsum"
    if mode == "tvsum" and not bundle.annotations:
        raise DataError("TVSum protocol needs annotator scores, the bundle has none")
    if mode == "summe" and not bundle.reference_masks:
        raise DataError("SumMe protocol needs reference masks, the bundle has none")
    return mode


def _needs_features(spec) -> bool:
    return isinstance(spec, (Kts, RandomizedKts))


def _make_tasks(bundle: DatasetBundle, cfg: ExperimentConfig, predictions=None, bias_only=False) -> list:
    mode = _resolve_mode(bundle, cfg)
    kind = cfg.scorer.split(":", 1)[0]
    if kind == "file" and predictions is None:
        predictions = load_prediction_scores(cfg.scorer.split(":", 1)[1], bundle)
    if _needs_features(cfg.segmenter):
        missing = [v for v in bundle.video_ids if v not in (bundle.features or {})]
        if missing:
            raise DataError(f"KTS segmentation needs per-frame features; missing for {missing}")
    tasks = []
    for video in sorted(bundle.videos, key=lambda v: v.video_id):
        vid = video.video_id
        ann = bundle.annotations.get(vid)
        refs = (bundle.reference_masks or {}).get(vid)
        if mode == "tvsum" and ann is None:
            raise DataError(f"{vid}: no annotator scores")
        if mode == "summe" and refs is None:
            raise DataError(f"{vid}: no reference masks")
        tasks.append(
            _VideoTask(
                video,
                cfg,
                mode,
                ann.matrix() if ann is not None else None,
                np.vstack([r.mask for r in refs]) if refs is not None else None,
                (bundle.features or {}).get(vid),
                predictions[vid].values if predictions is not None and kind == "file" else None,
                bias_only,
            )
        )
    return tasks


# KTS solves are deterministic and dominate sweep time; keyed by feature bytes
_KTS_CACHE: dict = {}
_KTS_CACHE_MAX = 256


def _cached_kts(video: VideoRecord, features: np.ndarray, kts: Kts):
    x = np.ascontiguousarray(features, dtype=np.float64)
    key = (video, x.shape, hashlib.blake2b(x.tobytes(), digest_size=16).digest(), kts)
    if key not in _KTS_CACHE:
        if len(_KTS_CACHE) >= _KTS_CACHE_MAX:
            _KTS_CACHE.clear()
        _KTS_CACHE[key] = segment_kts(video, x, kts.penalty_c, kts.max_segments, kts.min_seg_len)
    return _KTS_CACHE[key]


def _segmentations(task: _VideoTask):
    """Yield ``(trial, Segmentation)``; fixed segmenters are computed once."""
    cfg, video = task.cfg, task.video
    base = None
    if _needs_features(cfg.segmenter):
        kts = cfg.segmenter if isinstance(cfg.segmenter, Kts) else cfg.segmenter.base
        base = _cached_kts(video, task.features, kts)
    fixed = None if is_stochastic(cfg.segmenter) else segment(cfg.segmenter, video, base=base)
    for t in range(cfg.trials):
        if fixed is not None:
            yield t, fixed
        else:
            rng = make_rng(cfg.master_seed, "segment", t, video.video_id)
            yield t, segment(cfg.segmenter, video, rng=rng, base=base)


def _references(task: _VideoTask, seg, cap: int, exclude: Optional[int] = None) -> np.ndarray:
    if task.mode == "summe":
        refs = task.references
    else:
        pooled = pool_matrix(task.annotations, seg, task.cfg.pooling)
        lengths = seg.lengths
        refs = np.vstack([mask_from_segments(seg, knapsack_indices(row, lengths, cap)).mask for row in pooled])
    if exclude is not None:
        refs = np.delete(refs, exclude, axis=0)
    return refs


def _candidate_scores(task: _VideoTask, trial: int) -> np.ndarray:
    kind = task.cfg.scorer.split(":", 1)[0]
    if kind == "random":
        return random_frame_scores(task.video, make_rng(task.cfg.master_seed, "score", trial, task.video.video_id)).values
    if kind == "file":
        return task.prediction
    if kind == "annotator":
        if task.annotations is None:
            raise DataError("annotator scorer needs annotator scores")
        return task.annotations[int(task.cfg.scorer.split(":", 1)[1])]
    raise ValueError(f"scorer {task.cfg.scorer!r} is not a candidate scorer")


def _run_video(task: _VideoTask) -> dict:
    cfg = task.cfg
    cap = budget_frames(cfg.budget_fraction, task.video.n_frames)
    human = cfg.scorer == "human"
    exclude = int(cfg.scorer.split(":", 1)[1]) if cfg.scorer.startswith("annotator:") else None
    if exclude is not None and task.annotations is not None and not 0 <= exclude < len(task.annotations):
        raise DataError(f"{task.video.video_id}: no annotator {exclude}")
    avg, mx, below, share = [], [], [], []
    cached_refs = None
    for t, seg in _segmentations(task):
        if human:
            if task.mode == "summe":
                refs = task.references
            elif cached_refs is not None and not is_stochastic(cfg.segmenter):
                refs = cached_refs
            else:
                refs = cached_refs = _references(task, seg, cap)
            if len(refs) < 2:
                raise DataError(f"{task.video.video_id}: leave-one-out needs at least two annotators")
            a, m = loo_f1_arrays(refs)
            avg.append(float(a.mean()))
            mx.append(float(m.mean()))
            continue
        pooled = pool_scores(_candidate_scores(task, t), seg, cfg.pooling)
        chosen = knapsack_indices(pooled.values, seg.lengths, cap)
        gen = mask_from_segments(seg, chosen)
        stats = selected_length_stats(seg, gen)
        below.append(bool(stats["median_selected"] < stats["median_unselected"]))
        share.append(stats["share_of_short"])
        if task.bias_only:
            continue
        if cached_refs is None or is_stochastic(cfg.segmenter):
            cached_refs = _references(task, seg, cap, exclude)
        f1 = f1_matrix(gen.mask, cached_refs)[0]
        avg.append(float(f1.mean()))
        mx.append(float(f1.max()))
    return {"avg": avg, "max": mx, "below": below, "share": share}


def _map(tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [_run_video(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_video, tasks))


def _bias_summary(results) -> dict:
    below = [b for r in results for b in r["below"]]
    share = [s for r in results for s in r["share"] if not math.isnan(s)]
    if not below:
        return {}
    return {
        "pairs": len(below),
        "frac_median_selected_below_unselected": float(np.mean(below)),
        "mean_share_of_short": float(np.mean(share)) if share else math.nan,
    }


def _assemble(tasks, results, cfg: ExperimentConfig, method: str) -> ExperimentReport:
    per_video = {}
    for task, res in zip(tasks, results):
        a, m = confidence_interval(res["avg"], cfg.ci_method, cfg.master_seed), confidence_interval(
            res["max"], cfg.ci_method, cfg.master_seed
        )
        per_video[task.video.video_id] = {
            "avg_f1": a.mean,
            "avg_f1_ci": a.half_width_95,
            "max_f1": m.mean,
            "max_f1_ci": m.half_width_95,
            "trial_avg_f1": res["avg"],
            "trial_max_f1": res["max"],
        }
    trial_avg = np.mean([r["avg"] for r in results], axis=0)
    trial_max = np.mean([r["max"] for r in results], axis=0)
    avg_ci = confidence_interval(trial_avg, cfg.ci_method, cfg.master_seed)
    max_ci = confidence_interval(trial_max, cfg.ci_method, cfg.master_seed)
    return ExperimentReport(
        method=method,
        segmenter=segmenter_name(cfg.segmenter),
        budget_fraction=cfg.budget_fraction,
        config=cfg.to_dict(),
        seed=cfg.master_seed,
        per_video=per_video,
        avg_f1=float(np.mean([v["avg_f1"] for v in per_video.values()])),
        max_f1=float(np.mean([v["max_f1"] for v in per_video.values()])),
        avg_f1_ci=avg_ci.half_width_95,
        max_f1_ci=max_ci.half_width_95,
        trial_avg_f1=trial_avg.tolist(),
        trial_max_f1=trial_max.tolist(),
        bias=_bias_summary(results),
    )


def run_randomization_test(bundle: DatasetBundle, cfg: ExperimentConfig, predictions=None, jobs: int = 1) -> ExperimentReport:
    """Score candidate summaries (random, file or annotator scores) against
    the references over ``cfg.trials`` seeded trials."""
    if cfg.scorer == "human":
        raise ValueError("use run_human_loo for the human baseline")
    tasks = _make_tasks(bundle, cfg, predictions)
    return _assemble(tasks, _map(tasks, jobs), cfg, cfg.scorer)


def run_human_loo(bundle: DatasetBundle, cfg: ExperimentConfig, jobs: int = 1) -> ExperimentReport:
    """Leave-one-out human baseline under the configured segmentation."""
    cfg = replace(cfg, scorer="human")
    tasks = _make_tasks(bundle, cfg)
    return _assemble(tasks, _map(tasks, jobs), cfg, "human")


def run_experiment(bundle: DatasetBundle, cfg: ExperimentConfig, predictions=None, jobs: int = 1) -> ExperimentReport:
    if cfg.scorer == "human":
        return run_human_loo(bundle, cfg, jobs)
    return run_randomization_test(bundle, cfg, predictions, jobs)


def run_budget_sweep(
    bundle: DatasetBundle,
    cfg: ExperimentConfig,
    fractions: Sequence[float] = (0.15, 0.25, 0.35),
    predictions=None,
    jobs: int = 1,
) -> list:
    """One report per budget; seeds are shared so the runs are paired."""
    return [run_experiment(bundle, replace(cfg, budget_fraction=f), predictions, jobs) for f in fractions]


def run_selection_bias(bundle: DatasetBundle, cfg: ExperimentConfig, jobs: int = 1) -> dict:
    """Segment-length statistics of the candidate summaries only."""
    tasks = _make_tasks(bundle, replace(cfg, scorer="random") if cfg.scorer == "human" else cfg, bias_only=True)
    results = _map(tasks, jobs)
    summary = _bias_summary(results)
    summary["per_pair_share_of_short"] = [s for r in results for s in r["share"]]
    return summary


# ---------------------------------------------------------------- rank statistics


@dataclass
class RankEvalResult:
    method: str
    tau: float
    rho: float
    per_video: dict
    n_degenerate: int = 0
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "version": __version__,
            "method": self.method,
            "tau": self.tau,
            "rho": self.rho,
            "n_degenerate": self.n_degenerate,
            "config": self.config,
            "per_video": self.per_video,
        }


RANK_CSV_HEADER = ["method", "kendall_tau", "spearman_rho"]


def rank_results_to_csv(results: Sequence[RankEvalResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RANK_CSV_HEADER)
    for r in results:
        writer.writerow([r.method, repr(r.tau), repr(r.rho)])
    return buf.getvalue()


def _rank_video(args) -> dict:
    vid, scores, mode, pred, trials, master_seed = args
    ann = AnnotationSet(vid, [FrameScores(vid, row) for row in scores])
    if mode == "loo":
        a = scores.shape[0]
        if a < 2:
            raise DataError(f"{vid}: leave-one-out needs at least two annotators")
        tau = np.eye(a)
        rho = np.eye(a)
        ref = RankReference(ann)
        bad = 0
        for k in range(a):
            taus, rhos, deg = ref.correlations(scores[k])
            tau[k], rho[k] = taus, rhos
            bad += deg
        off = ~np.eye(a, dtype=bool)
        per_k_tau = tau[off].reshape(a, a - 1).mean(axis=1)
        per_k_rho = rho[off].reshape(a, a - 1).mean(axis=1)
        return {"tau": float(per_k_tau.mean()), "rho": float(per_k_rho.mean()), "n_degenerate": int(bad)}
    ref = RankReference(ann)
    if mode == "pred":
        res = ref.evaluate(pred)
        return {"tau": res.tau, "rho": res.rho, "n_degenerate": res.n_degenerate}
    taus, rhos, bad = [], [], 0
    for t in range(trials):
        p = make_rng(master_seed, "rank-random", t, vid).random(scores.shape[1])
        res = ref.evaluate(p)
        taus.append(res.tau)
        rhos.append(res.rho)
        bad += res.n_degenerate
    return {"tau": float(np.mean(taus)), "rho": float(np.mean(rhos)), "n_degenerate": bad, "trial_tau": taus, "trial_rho": rhos}


def run_rank_eval(
    bundle: DatasetBundle,
    mode: str = "random",
    predictions: Optional[dict] = None,
    trials: int = 100,
    master_seed: int = 0,
    jobs: int = 1,
    label: Optional[str] = None,
) -> RankEvalResult:
    """Kendall tau-b / Spearman rho against every annotator, averaged per
    video and then over videos. ``mode`` is ``pred``, ``random`` or ``loo``."""
    if mode not in ("pred", "random", "loo"):
        raise ValueError("mode must be pred, random or loo")
    if not bundle.annotations:
        raise DataError("rank evaluation needs annotator scores")
    if mode == "pred" and predictions is None:
        raise ValueError("pred mode needs predictions")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    vids = sorted(v for v in bundle.video_ids if v in bundle.annotations)
    args = [
        (
            vid,
            bundle.annotations[vid].matrix(),
            mode,
            predictions[vid].values if mode == "pred" else None,
            trials,
            master_seed,
        )
        for vid in vids
    ]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_rank_video, args))
    else:
        results = [_rank_video(a) for a in args]
    per_video = dict(zip(vids, results))
    method = label or {"random": "random", "loo": "human", "pred": "prediction"}[mode]
    return RankEvalResult(
        method=method,
        tau=float(np.mean([r["tau"] for r in results])),
        rho=float(np.mean([r["rho"] for r in results])),
        per_video=per_video,
        n_degenerate=int(sum(r["n_degenerate"] for r in results)),
        config={"mode": mode, "trials": trials if mode == "random" else 1, "master_seed": master_seed},
    )
