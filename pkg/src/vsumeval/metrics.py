"""F1 protocol, reference-summary generation and rank correlations."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .datamodel import AnnotationSet, DataError, FrameScores, Segmentation, SummaryMask, mask_from_segments
from .selection import Budget, budget_frames, knapsack_indices, pool_matrix


class DegenerateCorrelationWarning(RuntimeWarning):
    """A correlation was requested for a constant input; 0 was returned."""


@dataclass(frozen=True)
class F1Result:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class VideoEvaluation:
    per_reference: tuple
    avg_f1: float
    max_f1: float


@dataclass(frozen=True)
class LeaveOneOut:
    per_annotator: tuple
    mean_avg_f1: float
    mean_max_f1: float


@dataclass(frozen=True)
class RankCorrelation:
    tau: float
    rho: float
    n_degenerate: int = 0


def _as_bool(mask) -> np.ndarray:
    return np.asarray(mask.mask if isinstance(mask, SummaryMask) else mask, dtype=bool)


def f1_score(gen: SummaryMask, ref: SummaryMask) -> F1Result:
    g, r = _as_bool(gen), _as_bool(ref)
    if g.shape != r.shape:
        raise DataError(f"mask lengths differ: {g.size} vs {r.size}")
    overlap = int(np.count_nonzero(g & r))
    n_gen, n_ref = int(g.sum()), int(r.sum())
    precision = overlap / n_gen if n_gen else 0.0
    recall = overlap / n_ref if n_ref else 0.0
    if precision + recall == 0:
        return F1Result(precision, recall, 0.0)
    return F1Result(precision, recall, 2 * precision * recall / (precision + recall))


def f1_matrix(gen: np.ndarray, refs: np.ndarray) -> np.ndarray:
    """F1 of each row of ``gen`` against each row of ``refs`` via the closed
    form ``2|a & b| / (|a| + |b|)`` (zero when both are empty)."""
    g = np.atleast_2d(np.asarray(gen, dtype=np.float64))
    r = np.atleast_2d(np.asarray(refs, dtype=np.float64))
    overlap = g @ r.T
    sizes = g.sum(axis=1)[:, None] + r.sum(axis=1)[None, :]
    out = np.zeros_like(overlap)
    np.divide(2.0 * overlap, sizes, out=out, where=sizes > 0)
    return out


def evaluate_against_references(gen: SummaryMask, refs: Sequence[SummaryMask]) -> VideoEvaluation:
    if not refs:
        raise DataError("need at least one reference summary")
    per_ref = tuple(f1_score(gen, r) for r in refs)
    scores = [p.f1 for p in per_ref]
    return VideoEvaluation(per_ref, float(np.mean(scores)), float(max(scores)))


def tvsum_reference_summaries(
    ann: AnnotationSet,
    seg: Segmentation,
    budget: Union[Budget, float, int],
    pooling: str = "mean",
) -> list:
    """One reference per annotator: pool that annotator's scores over
    ``seg`` and keep the knapsack-optimal segments within the budget."""
    if seg.boundaries[-1] != ann.n_frames:
        raise DataError(f"{ann.video_id}: segmentation covers {seg.boundaries[-1]} frames, annotations {ann.n_frames}")
    cap = budget_frames(budget, ann.n_frames)
    pooled = pool_matrix(ann.matrix(), seg, pooling)
    lengths = seg.lengths
    return [mask_from_segments(seg, knapsack_indices(row, lengths, cap)) for row in pooled]


def leave_one_out_f1(summaries: Sequence[SummaryMask]) -> LeaveOneOut:
    """Score each summary against all the others."""
    if len(summaries) < 2:
        raise DataError("leave-one-out needs at least two summaries")
    per = []
    for k, cand in enumerate(summaries):
        others = [s for j, s in enumerate(summaries) if j != k]
        per.append(evaluate_against_references(cand, others))
    return LeaveOneOut(
        tuple(per),
        float(np.mean([p.avg_f1 for p in per])),
        float(np.mean([p.max_f1 for p in per])),
    )


def loo_f1_arrays(masks: np.ndarray) -> tuple:
    """Vectorised leave-one-out: per-annotator (avg, max) F1 arrays."""
    f1 = f1_matrix(masks, masks)
    a = f1.shape[0]
    off = ~np.eye(a, dtype=bool)
    others = f1[off].reshape(a, a - 1)
    return others.mean(axis=1), others.max(axis=1)


# ---------------------------------------------------------------- rank statistics

# Below this many distinct values, inversions are counted value by value.
_FEW_DISTINCT = 64


def _inversions_few(codes: np.ndarray, k: int) -> int:
    total = 0
    for v in range(k - 1):
        greater_before = np.cumsum(codes > v)
        total += int(greater_before[codes == v].sum())
    return total


def _inversions_merge(codes: np.ndarray) -> int:
    """Bottom-up merge sort, one vectorised pass per level."""
    n = codes.size
    size = 1 << max(0, (n - 1).bit_length())
    big = n + 1
    a = np.full(size, big, dtype=np.int64)
    a[:n] = codes
    span = big + 1
    total = 0
    w = 1
    while w < size:
        blocks = a.reshape(-1, 2, w)
        offset = (np.arange(blocks.shape[0], dtype=np.int64) * span)[:, None]
        left = (blocks[:, 0, :] + offset).ravel()
        right = blocks[:, 1, :] + offset
        not_greater = np.searchsorted(left, right.ravel(), side="right").reshape(right.shape)
        not_greater -= (np.arange(blocks.shape[0], dtype=np.int64) * w)[:, None]
        total += int((w - not_greater).sum())
        a = np.sort(blocks.reshape(-1, 2 * w), axis=1).ravel()
        w *= 2
    return total


def count_inversions(values) -> int:
    """Number of pairs ``i < j`` with ``values[i] > values[j]``."""
    uniq, codes = np.unique(np.asarray(values), return_inverse=True)
    codes = codes.astype(np.int64).ravel()
    if codes.size < 2:
        return 0
    if uniq.size <= _FEW_DISTINCT:
        return _inversions_few(codes, uniq.size)
    return _inversions_merge(codes)


def _tie_pairs(counts: np.ndarray) -> int:
    c = counts.astype(np.int64)
    return int((c * (c - 1) // 2).sum())


def _run_lengths(sorted_values: np.ndarray) -> np.ndarray:
    change = np.flatnonzero(sorted_values[1:] != sorted_values[:-1]) + 1
    edges = np.concatenate([[0], change, [sorted_values.size]])
    return np.diff(edges)


def _check_pair(x, y):
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size:
        raise DataError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise DataError("rank correlation needs at least two observations")
    return x, y


def _tau_b(x: np.ndarray, y: np.ndarray):
    n = x.size
    order = np.lexsort((y, x))
    xs, ys = x[order], y[order]
    n0 = n * (n - 1) // 2
    n1 = _tie_pairs(_run_lengths(xs))
    n2 = _tie_pairs(np.unique(y, return_counts=True)[1])
    joint_change = (xs[1:] != xs[:-1]) | (ys[1:] != ys[:-1])
    edges = np.concatenate([[0], np.flatnonzero(joint_change) + 1, [n]])
    n3 = _tie_pairs(np.diff(edges))
    discordant = count_inversions(ys)
    concordant = n0 - n1 - n2 + n3 - discordant
    denom = (n0 - n1) * (n0 - n2)
    if denom == 0:
        return 0.0, True
    return (concordant - discordant) / math.sqrt(denom), False


def average_ranks(values) -> np.ndarray:
    """1-based ranks; tied values share the mean of their positions."""
    uniq, inverse, counts = np.unique(np.asarray(values), return_inverse=True, return_counts=True)
    start = np.concatenate([[0], np.cumsum(counts)[:-1]])
    return (start + (counts + 1) / 2.0)[inverse.ravel()]


def _pearson(a: np.ndarray, b: np.ndarray):
    da, db = a - a.mean(), b - b.mean()
    ss = float(np.dot(da, da)) * float(np.dot(db, db))
    if ss <= 0:
        return 0.0, True
    return float(np.dot(da, db)) / math.sqrt(ss), False


def _warn_degenerate(name):
    warnings.warn(f"{name}: constant input, returning 0", DegenerateCorrelationWarning, stacklevel=3)


def kendall_tau_b(x, y) -> float:
    """Kendall's tau-b (tie corrected), O(n log n)."""
    x, y = _check_pair(x, y)
    tau, degenerate = _tau_b(x, y)
    if degenerate:
        _warn_degenerate("kendall_tau_b")
    return tau


def spearman_rho(x, y) -> float:
    """Pearson correlation of tie-averaged ranks."""
    x, y = _check_pair(x, y)
    rho, degenerate = _pearson(average_ranks(x), average_ranks(y))
    if degenerate:
        _warn_degenerate("spearman_rho")
    return rho


class RankReference:
    """Annotator rankings prepared once per video for repeated evaluation.

    Predictions without ties take a vectorised path: after sorting by the
    prediction, discordant pairs are inversions of each annotator's codes.
    """

    def __init__(self, ann: AnnotationSet):
        self.video_id = ann.video_id
        self.n_frames = ann.n_frames
        scores = ann.matrix()
        self._scores = scores
        uniq = np.unique(scores)
        self._codes = np.searchsorted(uniq, scores).astype(np.int64)
        self._n_codes = uniq.size
        n = self.n_frames
        self._n0 = n * (n - 1) // 2
        self._ties = np.array([_tie_pairs(np.unique(row, return_counts=True)[1]) for row in scores], dtype=np.int64)
        ranks = np.vstack([average_ranks(row) for row in scores])
        self._centered = ranks - ranks.mean(axis=1, keepdims=True)
        self._ss = np.einsum("ij,ij->i", self._centered, self._centered)

    def _discordant(self, order: np.ndarray) -> np.ndarray:
        codes = self._codes[:, order]
        if self._n_codes > _FEW_DISTINCT:
            return np.array([_inversions_merge(row) for row in codes], dtype=np.int64)
        total = np.zeros(codes.shape[0], dtype=np.int64)
        for v in range(self._n_codes - 1):
            greater_before = np.cumsum(codes > v, axis=1)
            total += np.where(codes == v, greater_before, 0).sum(axis=1)
        return total

    def correlations(self, pred) -> tuple:
        """Per-annotator ``(taus, rhos, degenerate_count)``."""
        p = pred.values if isinstance(pred, FrameScores) else np.asarray(pred, dtype=np.float64).ravel()
        if p.size != self.n_frames:
            raise DataError(f"{self.video_id}: prediction has {p.size} frames, annotations {self.n_frames}")
        if p.size < 2:
            raise DataError("rank correlation needs at least two observations")
        order = np.argsort(p, kind="stable")
        ps = p[order]
        degenerate = np.zeros(len(self._scores), dtype=bool)
        if np.all(ps[1:] != ps[:-1]):
            disc = self._discordant(order)
            conc = self._n0 - self._ties - disc
            denom = self._n0 * (self._n0 - self._ties).astype(np.float64)
            degenerate |= denom == 0
            taus = np.where(denom > 0, (conc - disc) / np.sqrt(np.where(denom > 0, denom, 1.0)), 0.0)
        else:
            pairs = [_tau_b(p, row) for row in self._scores]
            taus = np.array([t for t, _ in pairs])
            degenerate |= np.array([d for _, d in pairs])
        pr = average_ranks(p)
        pc = pr - pr.mean()
        ss = self._ss * float(np.dot(pc, pc))
        ok = ss > 0
        rhos = np.where(ok, (self._centered @ pc) / np.sqrt(np.where(ok, ss, 1.0)), 0.0)
        degenerate |= ~ok
        return taus, rhos, int(degenerate.sum())

    def evaluate(self, pred) -> RankCorrelation:
        taus, rhos, bad = self.correlations(pred)
        return RankCorrelation(float(np.mean(taus)), float(np.mean(rhos)), bad)


def rank_eval_vs_annotators(pred: Union[FrameScores, np.ndarray], ann: AnnotationSet) -> RankCorrelation:
    """Mean tau-b and rho between ``pred`` and each annotator."""
    return RankReference(ann).evaluate(pred)
