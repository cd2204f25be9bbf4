"""Segmenters: uniform, one-peak and two-peak Poisson, kernel temporal
segmentation (KTS) and shuffled KTS."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .datamodel import DataError, Segmentation, VideoRecord


@dataclass(frozen=True)
class Uniform:
    len_frames: int = 60

    def __post_init__(self):
        if self.len_frames < 1:
            raise ValueError("len_frames must be >= 1")


@dataclass(frozen=True)
class OnePeak:
    lam: float = 60.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")


@dataclass(frozen=True)
class TwoPeak:
    lambda_short: float = 30.0
    lambda_long: float = 90.0
    p_short: float = 0.5

    def __post_init__(self):
        if not (self.lambda_short > 0 and self.lambda_long > 0):
            raise ValueError("lambdas must be positive")
        if not 0.0 <= self.p_short <= 1.0:
            raise ValueError("p_short must lie in [0, 1]")


@dataclass(frozen=True)
class Kts:
    penalty_c: float = 1.0
    max_segments: int = 50
    min_seg_len: int = 1

    def __post_init__(self):
        if self.penalty_c < 0:
            raise ValueError("penalty_c must be non-negative")
        if self.max_segments < 1 or self.min_seg_len < 1:
            raise ValueError("max_segments and min_seg_len must be >= 1")


@dataclass(frozen=True)
class RandomizedKts:
    """KTS boundaries with the segment order shuffled per draw."""

    base: Kts = Kts()


SegmenterSpec = Union[Uniform, OnePeak, TwoPeak, Kts, RandomizedKts]

# exp(-lambda) must stay a normal double for the product method
_KNUTH_MAX_LAMBDA = 700.0


def knuth_poisson(lam, size: int, rng: np.random.Generator) -> np.ndarray:
    """Poisson draws by Knuth's product-of-uniforms method.

    ``lam`` may be a scalar or an array of length ``size``. Each draw
    multiplies uniforms until the product falls to ``exp(-lam)`` or below;
    the number of factors minus one is Poisson(lam). Vectorised across the
    draws so the loop runs roughly ``max(lam)`` times.
    """
    lam = np.broadcast_to(np.asarray(lam, dtype=np.float64), (size,))
    if np.any(lam <= 0) or np.any(lam > _KNUTH_MAX_LAMBDA):
        raise ValueError(f"lambda must lie in (0, {_KNUTH_MAX_LAMBDA}] for the product method")
    limit = np.exp(-lam)
    counts = np.zeros(size, dtype=np.int64)
    prod = np.ones(size)
    active = np.arange(size)
    while active.size:
        prod[active] *= rng.random(active.size)
        still = prod[active] > limit[active]
        counts[active[still]] += 1
        active = active[still]
    return counts


def _sample_lengths(spec, n: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(spec, OnePeak):
        lam = spec.lam
    else:
        short = rng.random(n) < spec.p_short
        lam = np.where(short, spec.lambda_short, spec.lambda_long)
    return np.maximum(knuth_poisson(lam, n, rng), 1)


def sample_segment_lengths(spec: Union[OnePeak, TwoPeak], n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. segment lengths (zero draws clamped to one frame)."""
    return _sample_lengths(spec, n, rng)


def _poisson_segmentation(video: VideoRecord, spec, rng) -> Segmentation:
    mean = spec.lam if isinstance(spec, OnePeak) else (
        spec.p_short * spec.lambda_short + (1 - spec.p_short) * spec.lambda_long
    )
    chunks = []
    total = 0
    while total < video.n_frames:
        k = max(8, int(1.2 * (video.n_frames - total) / max(mean, 1.0)) + 4)
        lengths = _sample_lengths(spec, k, rng)
        chunks.append(lengths)
        total += int(lengths.sum())
    lengths = np.concatenate(chunks)
    ends = np.cumsum(lengths)
    n_seg = int(np.searchsorted(ends, video.n_frames)) + 1
    bounds = np.concatenate([[0], ends[: n_seg - 1], [video.n_frames]])
    return Segmentation(video.video_id, bounds.tolist())


def segment_uniform(video: VideoRecord, len_frames: int = 60) -> Segmentation:
    if len_frames < 1:
        raise ValueError("len_frames must be >= 1")
    bounds = list(range(0, video.n_frames, len_frames)) + [video.n_frames]
    return Segmentation(video.video_id, bounds)


def segment_one_peak(video: VideoRecord, lam: float, rng: np.random.Generator) -> Segmentation:
    return _poisson_segmentation(video, OnePeak(lam), rng)


def segment_two_peak(
    video: VideoRecord,
    lambda_short: float,
    lambda_long: float,
    p_short: float,
    rng: np.random.Generator,
) -> Segmentation:
    return _poisson_segmentation(video, TwoPeak(lambda_short, lambda_long, p_short), rng)


def kts_penalty(m: int, n: int) -> float:
    """Segment-count penalty ``m * (log(n / m) + 1)``."""
    return m * (math.log(n / m) + 1.0)


def scatter_matrix(features: np.ndarray) -> np.ndarray:
    """``J[a, b]`` = within-segment scatter of frames ``[a, b)`` under the
    linear kernel, for ``0 <= a < b <= n``; zero elsewhere.

    Uses the prefix sums ``c_k = sum_{i<k} x_i``:
    ``sum_{i,j in [a,b)} K(i,j) = |c_b - c_a|^2``.
    """
    x = np.asarray(features, dtype=np.float64)
    n = x.shape[0]
    c = np.zeros((n + 1, x.shape[1]))
    np.cumsum(x, axis=0, out=c[1:])
    q = np.concatenate([[0.0], np.cumsum(np.einsum("ij,ij->i", x, x))])
    gram = c @ c.T
    d = np.diag(gram).copy()
    # block[a, b] = |c_b - c_a|^2, written over gram in place
    gram *= -2.0
    gram += d[:, None]
    gram += d[None, :]
    idx = np.arange(n + 1)
    width = (idx[None, :] - idx[:, None]).astype(np.float64)
    upper = width > 0
    gram[upper] /= width[upper]
    J = np.where(upper, (q[None, :] - q[:, None]) - gram, 0.0)
    # scatter is a sum of squared deviations; clip round-off below zero
    np.maximum(J, 0.0, out=J)
    return J


def kts_min_scatter(J: np.ndarray, max_segments: int, min_seg_len: int = 1):
    """Dynamic programme over change points.

    Returns ``(cost, back)`` where ``cost[m-1]`` is the least total scatter
    with exactly ``m`` segments (``inf`` when infeasible) and ``back`` lets
    :func:`_backtrack` recover the boundaries.
    """
    n = J.shape[0] - 1
    best = np.full((max_segments + 1, n + 1), np.inf)
    back = np.zeros((max_segments + 1, n + 1), dtype=np.int64)
    best[0, 0] = 0.0
    rows = np.arange(n + 1)[:, None]
    chunk = max(1, 4_000_000 // (n + 1))
    for m in range(1, max_segments + 1):
        prev = best[m - 1]
        if not np.isfinite(prev).any():
            break
        for lo in range(m * min_seg_len, n + 1, chunk):
            hi = min(n + 1, lo + chunk)
            cols = np.arange(lo, hi)[None, :]
            cand = prev[:hi, None] + J[:hi, lo:hi]
            # segment [a, b) must hold at least min_seg_len frames
            cand[rows[:hi] > cols - min_seg_len] = np.inf
            a = np.argmin(cand, axis=0)
            best[m, lo:hi] = cand[a, np.arange(hi - lo)]
            back[m, lo:hi] = a
    return best[1:, n], back


def _backtrack(back: np.ndarray, m: int, n: int) -> list:
    bounds = [n]
    b = n
    for k in range(m, 0, -1):
        b = int(back[k, b])
        bounds.append(b)
    return bounds[::-1]


def kts_objective(J: np.ndarray, bounds, penalty_c: float) -> float:
    """Penalised objective of an explicit boundary set (used by tests)."""
    n = J.shape[0] - 1
    m = len(bounds) - 1
    return float(sum(J[bounds[k], bounds[k + 1]] for k in range(m))) + penalty_c * kts_penalty(m, n)


def segment_kts(
    video: VideoRecord,
    features: np.ndarray,
    penalty_c: float = 1.0,
    max_segments: int = 50,
    min_seg_len: int = 1,
) -> Segmentation:
    """Kernel temporal segmentation with a linear kernel.

    Chooses the segment count ``m`` minimising
    ``scatter(m) + penalty_c * m * (log(n / m) + 1)``.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0 or x.shape[1] == 0:
        raise DataError(f"{video.video_id}: KTS needs a non-empty (frames x D) feature matrix")
    if not np.all(np.isfinite(x)):
        raise DataError(f"{video.video_id}: features contain NaN or infinite values")
    n = x.shape[0]
    if n != video.n_frames:
        raise DataError(f"{video.video_id}: features have {n} rows, video has {video.n_frames} frames")
    max_segments = min(max_segments, n // min_seg_len)
    if max_segments < 1:
        raise DataError(f"{video.video_id}: min_seg_len {min_seg_len} exceeds video length {n}")
    J = scatter_matrix(x)
    costs, back = kts_min_scatter(J, max_segments, min_seg_len)
    m_range = np.arange(1, max_segments + 1)
    penalised = costs + penalty_c * np.array([kts_penalty(int(m), n) for m in m_range])
    m = int(m_range[int(np.argmin(penalised))])
    return Segmentation(video.video_id, _backtrack(back, m, n))


def randomize_kts(seg: Segmentation, rng: np.random.Generator) -> Segmentation:
    """Shuffle segment order; the multiset of lengths is kept exactly."""
    lengths = seg.lengths
    return Segmentation.from_lengths(seg.video_id, lengths[rng.permutation(lengths.size)])


def segment(
    spec: SegmenterSpec,
    video: VideoRecord,
    rng: Optional[np.random.Generator] = None,
    features: Optional[np.ndarray] = None,
    base: Optional[Segmentation] = None,
) -> Segmentation:
    """Dispatch on a segmenter spec.

    ``base`` short-circuits the KTS computation for :class:`RandomizedKts`
    (and :class:`Kts`) so repeated trials reuse one change-point solve.
    """
    if isinstance(spec, Uniform):
        return segment_uniform(video, spec.len_frames)
    if isinstance(spec, OnePeak):
        return segment_one_peak(video, spec.lam, rng)
    if isinstance(spec, TwoPeak):
        return segment_two_peak(video, spec.lambda_short, spec.lambda_long, spec.p_short, rng)
    if isinstance(spec, (Kts, RandomizedKts)):
        kts = spec if isinstance(spec, Kts) else spec.base
        if base is None:
            if features is None:
                raise DataError(f"{video.video_id}: KTS segmentation needs per-frame features")
            base = segment_kts(video, features, kts.penalty_c, kts.max_segments, kts.min_seg_len)
        return base if isinstance(spec, Kts) else randomize_kts(base, rng)
    raise TypeError(f"unknown segmenter spec {spec!r}")


SEGMENTER_NAMES = {
    Uniform: "uniform",
    OnePeak: "one-peak",
    TwoPeak: "two-peak",
    Kts: "kts",
    RandomizedKts: "randomized-kts",
}


def segmenter_name(spec: SegmenterSpec) -> str:
    return SEGMENTER_NAMES[type(spec)]


def segmenter_to_dict(spec: SegmenterSpec) -> dict:
    params = {"base": vars(spec.base)} if isinstance(spec, RandomizedKts) else dict(vars(spec))
    return {"method": segmenter_name(spec), **params}


def is_stochastic(spec: SegmenterSpec) -> bool:
    """Whether the segmenter draws new boundaries per trial."""
    return not isinstance(spec, (Uniform, Kts))


def make_segmenter(
    method: str,
    len_frames: int = 60,
    lam: float = 60.0,
    lambda_short: float = 30.0,
    lambda_long: float = 90.0,
    p_short: float = 0.5,
    penalty_c: float = 1.0,
    max_segments: int = 50,
    min_seg_len: int = 1,
) -> SegmenterSpec:
    kts = Kts(penalty_c, max_segments, min_seg_len)
    builders = {
        "uniform": lambda: Uniform(len_frames),
        "one-peak": lambda: OnePeak(lam),
        "two-peak": lambda: TwoPeak(lambda_short, lambda_long, p_short),
        "kts": lambda: kts,
        "randomized-kts": lambda: RandomizedKts(kts),
    }
    if method not in builders:
        raise ValueError(f"unknown segmentation method {method!r}; choose from {sorted(builders)}")
    return builders[method]()
