"""Segment pooling and knapsack summary selection."""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .datamodel import DataError, FrameScores, Segmentation, SummaryMask, mask_from_segments

BRUTE_FORCE_MAX_SEGMENTS = 25

# Segment values are compared on a fixed-point grid of 2**-40 of the largest
# value so that the DP and the enumeration oracle see identical ties.
_VALUE_BITS = 40


@dataclass(frozen=True, eq=False)
class SegmentScores:
    video_id: str
    seg: Segmentation
    values: np.ndarray
    pooling: str = "mean"

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (self.seg.n_segments,):
            raise DataError(f"{self.video_id}: {values.size} segment values for {self.seg.n_segments} segments")
        if not np.all(np.isfinite(values)):
            raise DataError(f"{self.video_id}: segment values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class Budget:
    """Summary length limit: a fraction of the video or an absolute frame count."""

    fraction: Optional[float] = None
    frames: Optional[int] = None

    def __post_init__(self):
        if (self.fraction is None) == (self.frames is None):
            raise ValueError("give exactly one of fraction or frames")
        if self.fraction is not None and not 0.0 < self.fraction <= 1.0:
            raise ValueError("budget fraction must lie in (0, 1]")
        if self.frames is not None and self.frames < 0:
            raise ValueError("budget frames must be >= 0")

    def resolve(self, n_frames: int) -> int:
        if self.frames is not None:
            return min(int(self.frames), n_frames)
        # floor keeps summaries strictly within the stated fraction
        return int(math.floor(self.fraction * n_frames + 1e-9))


def budget_frames(budget: Union[Budget, float, int], n_frames: int) -> int:
    if isinstance(budget, Budget):
        return budget.resolve(n_frames)
    if isinstance(budget, float):
        return Budget(fraction=budget).resolve(n_frames)
    return Budget(frames=int(budget)).resolve(n_frames)


def pool_scores(frame_scores: Union[FrameScores, np.ndarray], seg: Segmentation, pooling: str = "mean") -> SegmentScores:
    values = frame_scores.values if isinstance(frame_scores, FrameScores) else np.asarray(frame_scores, float)
    if values.shape[-1] != seg.boundaries[-1]:
        raise DataError(f"{seg.video_id}: {values.shape[-1]} frame scores for a {seg.boundaries[-1]}-frame segmentation")
    sums = np.add.reduceat(values, seg.starts)
    if pooling == "sum":
        pooled = sums
    elif pooling == "mean":
        pooled = sums / seg.lengths
    else:
        raise ValueError(f"pooling must be 'mean' or 'sum', got {pooling!r}")
    return SegmentScores(seg.video_id, seg, pooled, pooling)


def pool_matrix(matrix: np.ndarray, seg: Segmentation, pooling: str = "mean") -> np.ndarray:
    """Pool every row of an ``(A, n_frames)`` array at once."""
    sums = np.add.reduceat(np.asarray(matrix, float), seg.starts, axis=1)
    return sums / seg.lengths if pooling == "mean" else sums


def quantize_values(values: np.ndarray) -> np.ndarray:
    """Integer knapsack values; non-positive values map to 0 (never selected)."""
    values = np.asarray(values, dtype=np.float64)
    top = values.max(initial=0.0)
    if top <= 0:
        return np.zeros(values.shape, dtype=np.int64)
    q = np.rint(values / top * float(1 << _VALUE_BITS))
    return np.maximum(q, 0).astype(np.int64)


def knapsack_indices(values: np.ndarray, lengths: np.ndarray, capacity: int) -> list:
    """Exact 0/1 knapsack; returns the lexicographically smallest optimal
    index set. Items with non-positive (quantised) value are never chosen."""
    q = quantize_values(values)
    w = np.asarray(lengths, dtype=np.int64)
    n = q.size
    capacity = int(capacity)
    if capacity <= 0 or n == 0:
        return []
    # table[i, c]: best value from items i.. with capacity c
    table = np.zeros((n + 1, capacity + 1), dtype=np.int64)
    for i in range(n - 1, -1, -1):
        row = table[i]
        row[:] = table[i + 1]
        if q[i] > 0 and w[i] <= capacity:
            take = table[i + 1, : capacity + 1 - w[i]] + q[i]
            np.maximum(row[w[i]:], take, out=row[w[i]:])
    chosen = []
    c = capacity
    for i in range(n):
        if q[i] > 0 and w[i] <= c and table[i + 1, c - w[i]] + q[i] == table[i, c]:
            chosen.append(i)
            c -= int(w[i])
    return chosen


def knapsack_select(seg_scores: SegmentScores, budget_frames: int) -> SummaryMask:
    """Maximise total segment value subject to total length <= budget."""
    if budget_frames < 0:
        raise ValueError("budget_frames must be >= 0")
    chosen = knapsack_indices(seg_scores.values, seg_scores.seg.lengths, budget_frames)
    return mask_from_segments(seg_scores.seg, chosen)


@lru_cache(maxsize=None)
def _subset_table(n: int) -> np.ndarray:
    table = ((np.arange(1 << n)[:, None] >> np.arange(n)[None, :]) & 1).astype(np.int64)
    table.setflags(write=False)
    return table


def brute_force_indices(values: np.ndarray, lengths: np.ndarray, capacity: int) -> list:
    q = quantize_values(values)
    w = np.asarray(lengths, dtype=np.int64)
    n = q.size
    if n > BRUTE_FORCE_MAX_SEGMENTS:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_MAX_SEGMENTS} segments, got {n}")
    if n == 0:
        return []
    subsets = _subset_table(n)
    total_w = subsets @ w
    total_q = subsets @ q
    feasible = total_w <= capacity
    best = total_q[feasible].max()
    optima = np.flatnonzero(feasible & (total_q == best))
    candidates = [tuple(np.flatnonzero(subsets[s]).tolist()) for s in optima]
    # items of zero value add nothing; the optimum never carries them
    candidates = [c for c in candidates if all(q[i] > 0 for i in c)]
    return list(min(candidates))


def brute_force_select(seg_scores: SegmentScores, budget_frames: int) -> SummaryMask:
    """Exhaustive oracle for :func:`knapsack_select` (at most 25 segments)."""
    chosen = brute_force_indices(seg_scores.values, seg_scores.seg.lengths, budget_frames)
    return mask_from_segments(seg_scores.seg, chosen)


def selected_segments(seg: Segmentation, mask: SummaryMask) -> np.ndarray:
    """Boolean per-segment selection; raises if the mask splits a segment."""
    m = np.asarray(mask.mask, dtype=np.int64)
    if m.size != seg.boundaries[-1]:
        raise DataError(f"{seg.video_id}: mask length {m.size} does not match segmentation")
    sums = np.add.reduceat(m, seg.starts)
    full = sums == seg.lengths
    if np.any((sums > 0) & ~full):
        k = int(np.flatnonzero((sums > 0) & ~full)[0])
        raise DataError(f"{seg.video_id}: mask partially covers segment {k}")
    return full


def selected_length_stats(seg: Segmentation, mask: SummaryMask) -> dict:
    """Lengths of chosen versus discarded segments.

    ``share_of_short`` is the fraction of selected frames that sit in
    segments shorter than the median segment length of the whole video
    (NaN when nothing is selected).
    """
    picked = selected_segments(seg, mask)
    lengths = seg.lengths
    sel, unsel = lengths[picked], lengths[~picked]
    median_all = float(np.median(lengths))
    sel_frames = int(sel.sum())
    short_frames = int(sel[sel < median_all].sum())
    return {
        "selected_lengths": sel.tolist(),
        "unselected_lengths": unsel.tolist(),
        "median_selected": float(np.median(sel)) if sel.size else math.nan,
        "median_unselected": float(np.median(unsel)) if unsel.size else math.nan,
        "median_all": median_all,
        "share_of_short": short_frames / sel_frames if sel_frames else math.nan,
    }
