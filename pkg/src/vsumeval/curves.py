"""Accumulated-score correlation curves and their CSV/SVG rendering.

For a prediction, frames are ranked by predicted score (descending, ties
by frame index) and the mean human score is accumulated in that order and
normalised to end at 1. Sorting the reference itself descending/ascending
gives the upper/lower envelope; ``i/n`` is the expectation for random
scores.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .datamodel import AnnotationSet, DataError, FrameScores

SVG_WIDTH, SVG_HEIGHT = 800, 500
SVG_MAX_POINTS = 2000
_PALETTE = ("#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


@dataclass(frozen=True, eq=False)
class CorrelationCurve:
    video_id: str
    label: str
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)


def _values(scores) -> np.ndarray:
    return scores.values if isinstance(scores, FrameScores) else np.asarray(scores, dtype=np.float64)


def _normalised_prefix(ref: np.ndarray, order: np.ndarray) -> np.ndarray:
    total = ref.sum()
    if not total > 0:
        raise DataError("reference scores sum to zero; the curve is undefined")
    pts = np.cumsum(ref[order]) / total
    pts[-1] = 1.0
    return pts


def mean_reference_scores(ann: AnnotationSet) -> FrameScores:
    return FrameScores(ann.video_id, ann.matrix().mean(axis=0))


def accumulate_curve(pred, ref_mean, label: str = "prediction") -> CorrelationCurve:
    p, r = _values(pred), _values(ref_mean)
    if p.shape != r.shape:
        raise DataError(f"prediction has {p.size} frames, reference {r.size}")
    # lexsort's last key is primary: -p descending, then frame index ascending
    order = np.lexsort((np.arange(p.size), -p))
    vid = getattr(ref_mean, "video_id", getattr(pred, "video_id", ""))
    return CorrelationCurve(vid, label, _normalised_prefix(r, order))


def curve_bounds(ref_mean) -> dict:
    r = _values(ref_mean)
    vid = getattr(ref_mean, "video_id", "")
    asc = np.argsort(r, kind="stable")
    return {
        "upper": CorrelationCurve(vid, "upper", _normalised_prefix(r, asc[::-1])),
        "lower": CorrelationCurve(vid, "lower", _normalised_prefix(r, asc)),
    }


def random_baseline(n: int, video_id: str = "") -> CorrelationCurve:
    if n < 1:
        raise DataError("baseline needs n >= 1")
    return CorrelationCurve(video_id, "baseline", np.arange(1, n + 1) / n)


def annotator_curves(ann: AnnotationSet) -> list:
    """Each annotator ranked against the mean of the remaining ones."""
    if len(ann) < 2:
        raise DataError("annotator curves need at least two annotators")
    scores = ann.matrix()
    total = scores.sum(axis=0)
    curves = []
    for k in range(scores.shape[0]):
        rest = FrameScores(ann.video_id, (total - scores[k]) / (scores.shape[0] - 1))
        curves.append(accumulate_curve(scores[k], rest, f"annotator_{k}"))
    return curves


def curves_to_csv(curves: Sequence[CorrelationCurve], bounds: dict, baseline: CorrelationCurve) -> str:
    columns = [c.points for c in curves] + [bounds["upper"].points, bounds["lower"].points, baseline.points]
    n = len(baseline)
    if any(len(col) != n for col in columns):
        raise DataError("all curves must have the same length")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["i", *[c.label for c in curves], "upper", "lower", "baseline"])
    for i in range(n):
        writer.writerow([i + 1, *(repr(float(col[i])) for col in columns)])
    return buf.getvalue()


def _stride_indices(n: int, limit: int = SVG_MAX_POINTS) -> np.ndarray:
    if n <= limit:
        return np.arange(n)
    idx = np.unique(np.linspace(0, n - 1, limit).round().astype(int))
    return idx


def curves_to_svg(
    curves: Sequence[CorrelationCurve],
    bounds: dict,
    baseline: CorrelationCurve,
    title: str = "",
    description: str = "",
) -> str:
    n = len(baseline)
    if any(len(c) != n for c in [*curves, bounds["upper"], bounds["lower"]]):
        raise DataError("all curves must have the same length")
    left, right, top, bottom = 60, 180, 40, 50
    pw, ph = SVG_WIDTH - left - right, SVG_HEIGHT - top - bottom
    idx = _stride_indices(n)
    xs = left + pw * (idx + 1) / n

    def ys(points):
        return top + ph * (1.0 - points[idx])

    def path(x, y):
        return " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(x, y))

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" '
        f'viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
    ]
    if description:
        out.append(f"<desc>{escape(description)}</desc>")
    out.append(f'<rect x="0" y="0" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>')
    if title:
        out.append(f'<text x="{left}" y="24" font-family="sans-serif" font-size="14">{escape(title)}</text>')
    upper, lower = ys(bounds["upper"].points), ys(bounds["lower"].points)
    region = path(np.concatenate([xs, xs[::-1]]), np.concatenate([upper, lower[::-1]]))
    out.append(f'<polygon class="bounds" points="{region}" fill="#add8e6" fill-opacity="0.6" stroke="none"/>')
    out.append(
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black" stroke-width="1"/>'
    )
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = top + ph * (1 - tick)
        x = left + pw * tick
        out.append(f'<text x="{left - 8}" y="{y + 4:.1f}" font-family="sans-serif" font-size="10" text-anchor="end">{tick:g}</text>')
        out.append(f'<text x="{x:.1f}" y="{top + ph + 16}" font-family="sans-serif" font-size="10" text-anchor="middle">{tick:g}</text>')
    out.append(
        f'<text x="{left + pw / 2:.1f}" y="{SVG_HEIGHT - 12}" font-family="sans-serif" font-size="11" '
        'text-anchor="middle">fraction of frames (sorted by predicted score)</text>'
    )
    out.append(
        f'<polyline class="baseline" points="{path(xs, ys(baseline.points))}" fill="none" stroke="black" '
        'stroke-width="1.5" stroke-dasharray="6,4"/>'
    )
    legend_y = top + 10
    for k, c in enumerate(curves):
        colour = _PALETTE[k % len(_PALETTE)]
        out.append(
            f'<polyline class="curve" data-label="{escape(c.label)}" points="{path(xs, ys(c.points))}" '
            f'fill="none" stroke="{colour}" stroke-width="1.2"/>'
        )
        ly = legend_y + 16 * k
        out.append(f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 32}" y2="{ly}" stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 38}" y="{ly + 4}" font-family="sans-serif" font-size="10">{escape(c.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_curves(
    curves: Sequence[CorrelationCurve],
    bounds: dict,
    baseline: CorrelationCurve,
    path,
    format: str = "csv",
    title: str = "",
    description: str = "",
) -> Path:
    if format == "csv":
        text = curves_to_csv(curves, bounds, baseline)
    elif format == "svg":
        text = curves_to_svg(curves, bounds, baseline, title, description)
    else:
        raise ValueError(f"format must be 'csv' or 'svg', got {format!r}")
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path
