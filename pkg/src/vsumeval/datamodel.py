"""Core value types shared by every stage of the evaluation pipeline.

Frames are indexed from zero and segments are half-open ``[b_k, b_{k+1})``.
All scores live at frame level; shot-level inputs are expanded once, on
ingestion, by :func:`expand_shot_scores`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class DataError(ValueError):
    """Input data violates a structural or metadata contract."""


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class VideoRecord:
    video_id: str
    n_frames: int
    fps: float

    def __post_init__(self):
        if not isinstance(self.video_id, str) or not self.video_id:
            raise DataError("video_id must be a non-empty string")
        if int(self.n_frames) != self.n_frames or self.n_frames < 1:
            raise DataError(f"{self.video_id}: n_frames must be a positive integer, got {self.n_frames!r}")
        if not np.isfinite(self.fps) or self.fps <= 0:
            raise DataError(f"{self.video_id}: fps must be positive, got {self.fps!r}")
        object.__setattr__(self, "n_frames", int(self.n_frames))
        object.__setattr__(self, "fps", float(self.fps))


@dataclass(frozen=True, eq=False)
class FrameScores:
    video_id: str
    values: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.values, np.float64)
        if arr.ndim != 1:
            raise DataError(f"{self.video_id}: frame scores must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise DataError(f"{self.video_id}: frame scores contain NaN or infinite values")
        object.__setattr__(self, "values", arr)

    def __len__(self):
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, FrameScores):
            return NotImplemented
        return self.video_id == other.video_id and np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass(frozen=True)
class Segmentation:
    """Boundaries ``0 = b_0 < b_1 < ... < b_S = n_frames``.

    Construction only normalises types; use :func:`validate_segmentation`
    to check the boundaries against a video.
    """

    video_id: str
    boundaries: tuple

    def __post_init__(self):
        object.__setattr__(self, "boundaries", tuple(int(b) for b in self.boundaries))

    @property
    def n_segments(self) -> int:
        return len(self.boundaries) - 1

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(np.asarray(self.boundaries, dtype=np.int64))

    @property
    def starts(self) -> np.ndarray:
        return np.asarray(self.boundaries[:-1], dtype=np.int64)

    @classmethod
    def from_lengths(cls, video_id: str, lengths: Iterable[int]) -> "Segmentation":
        return cls(video_id, (0, *np.cumsum(np.asarray(list(lengths), dtype=np.int64)).tolist()))


@dataclass(frozen=True, eq=False)
class SummaryMask:
    video_id: str
    mask: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.mask)
        if raw.ndim != 1:
            raise DataError(f"{self.video_id}: summary mask must be one-dimensional")
        if raw.size and not np.all((raw == 0) | (raw == 1)):
            raise DataError(f"{self.video_id}: summary mask values must be 0 or 1")
        object.__setattr__(self, "mask", _frozen_array(raw, bool))

    def __len__(self):
        return len(self.mask)

    @property
    def n_selected(self) -> int:
        return int(self.mask.sum())

    def __eq__(self, other):
        if not isinstance(other, SummaryMask):
            return NotImplemented
        return self.video_id == other.video_id and np.array_equal(self.mask, other.mask)

    __hash__ = None


@dataclass(frozen=True)
class AnnotationSet:
    video_id: str
    annotators: tuple = field(default_factory=tuple)

    def __post_init__(self):
        annotators = tuple(self.annotators)
        if not annotators:
            raise DataError(f"{self.video_id}: an annotation set needs at least one annotator")
        lengths = {len(a) for a in annotators}
        if len(lengths) != 1:
            raise DataError(f"{self.video_id}: annotators have differing lengths {sorted(lengths)}")
        for a in annotators:
            if a.video_id != self.video_id:
                raise DataError(f"annotator scores for {a.video_id!r} filed under {self.video_id!r}")
        object.__setattr__(self, "annotators", annotators)

    def __len__(self):
        return len(self.annotators)

    @property
    def n_frames(self) -> int:
        return len(self.annotators[0])

    def matrix(self) -> np.ndarray:
        """Scores as an ``(A, n_frames)`` array."""
        return np.vstack([a.values for a in self.annotators])


def validate_segmentation(seg: Segmentation, video: VideoRecord) -> list[str]:
    """Return the list of invariant violations; empty means valid."""
    violations = []
    b = seg.boundaries
    if seg.video_id != video.video_id:
        violations.append(f"segmentation is for {seg.video_id!r}, video is {video.video_id!r}")
    if len(b) < 2:
        violations.append("needs at least one segment")
        return violations
    if b[0] != 0:
        violations.append(f"does not start at frame 0 (starts at {b[0]})")
    if b[-1] < video.n_frames:
        violations.append(f"does not cover tail: ends at {b[-1]}, video has {video.n_frames} frames")
    elif b[-1] > video.n_frames:
        violations.append(f"runs past the end: ends at {b[-1]}, video has {video.n_frames} frames")
    for k in range(len(b) - 1):
        if b[k + 1] == b[k]:
            violations.append(f"empty segment at index {k} (frame {b[k]})")
        elif b[k + 1] < b[k]:
            violations.append(f"boundaries decrease at index {k}: {b[k]} -> {b[k + 1]}")
    return violations


def expand_shot_scores(shot_scores: Sequence[float], shot_len_sec: float, video: VideoRecord) -> FrameScores:
    """Repeat each shot score over ``round(shot_len_sec * fps)`` frames.

    The last shot is truncated or extended so the result has exactly
    ``video.n_frames`` entries. More than one shot of slack in either
    direction means the metadata and the scores disagree.
    """
    scores = np.asarray(shot_scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size == 0:
        raise DataError(f"{video.video_id}: shot scores must be a non-empty sequence")
    if shot_len_sec <= 0:
        raise DataError(f"shot length must be positive, got {shot_len_sec}")
    per_shot = max(1, int(round(shot_len_sec * video.fps)))
    covered = per_shot * scores.size
    # the last shot may be partial (short by < per_shot) or extended by < per_shot
    if not (covered - per_shot < video.n_frames < covered + per_shot):
        raise DataError(
            f"{video.video_id}: {scores.size} shots of {per_shot} frames cannot cover "
            f"{video.n_frames} frames (inconsistent metadata)"
        )
    frames = np.repeat(scores, per_shot)
    if frames.size >= video.n_frames:
        frames = frames[: video.n_frames]
    else:
        frames = np.concatenate([frames, np.full(video.n_frames - frames.size, scores[-1])])
    return FrameScores(video.video_id, frames)


def mask_from_segments(seg: Segmentation, selected: Iterable[int]) -> SummaryMask:
    selected = sorted(set(int(k) for k in selected))
    if selected and (selected[0] < 0 or selected[-1] >= seg.n_segments):
        raise IndexError(f"segment index out of range for {seg.n_segments} segments: {selected}")
    mask = np.zeros(seg.boundaries[-1], dtype=bool)
    for k in selected:
        mask[seg.boundaries[k] : seg.boundaries[k + 1]] = True
    return SummaryMask(seg.video_id, mask)
