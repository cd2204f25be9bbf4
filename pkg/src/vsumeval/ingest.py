"""Dataset loading, writing and synthesis.

Three on-disk formats are understood:

* TVSum-style TSV: ``video_id<TAB>category<TAB>s,s,s,...`` with integer
  scores in 1..5, one row per annotator, plus a sidecar ``videos.json``
  listing ``video_id``, ``n_frames`` and ``fps``. Rows hold one score per
  2-second shot; rows whose length already equals ``n_frames`` are taken
  as frame-level (the public release repeats each shot score per frame).
* Neutral dataset JSON (see ``DATASET_SCHEMA``), which also carries
  SumMe-style reference masks and per-frame features.
* Prediction JSON: ``{video_id: [frame scores]}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from .datamodel import (
    AnnotationSet,
    DataError,
    FrameScores,
    SummaryMask,
    VideoRecord,
    expand_shot_scores,
)
from .metrics import tvsum_reference_summaries
from .seeding import make_rng
from .segmentation import segment_uniform

TVSUM_SHOT_SECONDS = 2.0

DATASET_SCHEMA = {
    "type": "object",
    "required": ["videos"],
    "additionalProperties": False,
    "properties": {
        "videos": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["video_id", "n_frames", "fps"],
                "properties": {
                    "video_id": {"type": "string", "minLength": 1},
                    "n_frames": {"type": "integer", "minimum": 1},
                    "fps": {"type": "number", "exclusiveMinimum": 0},
                    "category": {"type": "string"},
                },
            },
        },
        "annotations": {
            "type": "object",
            "additionalProperties": {
                "type": "array",
                "minItems": 1,
                "items": {"type": "array", "items": {"type": "number"}},
            },
        },
        "reference_masks": {
            "type": "object",
            "additionalProperties": {
                "type": "array",
                "minItems": 1,
                "items": {"type": "array", "items": {"enum": [0, 1]}},
            },
        },
        "features": {
            "type": "object",
            "additionalProperties": {
                "type": "array",
                "items": {"type": "array", "minItems": 1, "items": {"type": "number"}},
            },
        },
        "reference_max_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "meta": {"type": "object"},
    },
}

PREDICTION_SCHEMA = {
    "type": "object",
    "additionalProperties": {"type": "array", "items": {"type": "number"}},
}


@dataclass(frozen=True, eq=False)
class DatasetBundle:
    videos: tuple
    annotations: dict = field(default_factory=dict)
    reference_masks: Optional[dict] = None
    features: Optional[dict] = None
    reference_max_fraction: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        videos = tuple(self.videos)
        object.__setattr__(self, "videos", videos)
        ids = [v.video_id for v in videos]
        dup = sorted({i for i in ids if ids.count(i) > 1})
        if dup:
            raise DataError(f"duplicate video ids: {dup}")
        index = {v.video_id: v for v in videos}
        object.__setattr__(self, "_index", index)
        for name in ("annotations", "reference_masks", "features"):
            extra = sorted(set(getattr(self, name) or {}) - set(index))
            if extra:
                raise DataError(f"{name} reference unknown videos: {extra}")
        for vid, ann in self.annotations.items():
            if ann.n_frames != index[vid].n_frames:
                raise DataError(f"{vid}: annotations have {ann.n_frames} frames, video has {index[vid].n_frames}")
        for vid, masks in (self.reference_masks or {}).items():
            n = index[vid].n_frames
            for k, m in enumerate(masks):
                if len(m) != n:
                    raise DataError(f"{vid}: reference mask {k} has {len(m)} frames, video has {n}")
                if self.reference_max_fraction is not None and m.n_selected > self.reference_max_fraction * n:
                    raise DataError(
                        f"{vid}: reference mask {k} selects {m.n_selected} of {n} frames, "
                        f"over the declared {self.reference_max_fraction:.0%} limit"
                    )
        for vid, feats in (self.features or {}).items():
            if feats.ndim != 2 or feats.shape[0] != index[vid].n_frames:
                raise DataError(f"{vid}: features of shape {feats.shape} do not match {index[vid].n_frames} frames")

    def video(self, video_id: str) -> VideoRecord:
        try:
            return self._index[video_id]
        except KeyError:
            raise DataError(f"unknown video id {video_id!r}") from None

    @property
    def video_ids(self) -> list:
        return [v.video_id for v in self.videos]

    def __eq__(self, other):
        if not isinstance(other, DatasetBundle):
            return NotImplemented
        return bundle_to_dict(self) == bundle_to_dict(other)

    __hash__ = None


# ---------------------------------------------------------------- TVSum TSV


def load_tvsum_tsv(path, meta_path=None, shot_len_sec: float = TVSUM_SHOT_SECONDS) -> DatasetBundle:
    path = Path(path)
    meta_path = Path(meta_path) if meta_path else path.with_name("videos.json")
    if not meta_path.exists():
        raise DataError(f"metadata sidecar {meta_path} not found")
    records = {}
    try:
        meta_doc = json.loads(meta_path.read_text(encoding="utf-8"))
        for entry in meta_doc:
            rec = VideoRecord(entry["video_id"], entry["n_frames"], entry["fps"])
            records[rec.video_id] = rec
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise DataError(f"{meta_path}: malformed metadata ({exc})") from exc

    rows: dict = {}
    categories = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}")
            vid, category, raw = parts
            try:
                scores = [int(s) for s in raw.split(",")]
            except ValueError:
                raise DataError(f"{path}:{lineno}: scores must be comma-separated integers") from None
            bad = [s for s in scores if not 1 <= s <= 5]
            if bad:
                raise DataError(f"{path}:{lineno}: score {bad[0]} outside 1..5")
            if vid not in records:
                raise DataError(f"{path}:{lineno}: no metadata for video {vid!r}")
            rows.setdefault(vid, []).append((lineno, scores))
            categories[vid] = category

    annotations = {}
    for vid, entries in rows.items():
        rec = records[vid]
        frame_scores = []
        for lineno, scores in entries:
            if len(scores) == rec.n_frames:
                frame_scores.append(FrameScores(vid, scores))
                continue
            try:
                frame_scores.append(expand_shot_scores(scores, shot_len_sec, rec))
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
        annotations[vid] = AnnotationSet(vid, frame_scores)
    videos = tuple(records[v] for v in rows) + tuple(r for v, r in records.items() if v not in rows)
    return DatasetBundle(videos, annotations, meta={"categories": categories})


# ---------------------------------------------------------------- neutral JSON


def _schema_error(exc: jsonschema.ValidationError, source) -> DataError:
    return DataError(f"{source}: {exc.json_path}: {exc.message}")


def bundle_from_dict(doc: dict, source="<document>") -> DatasetBundle:
    try:
        jsonschema.validate(doc, DATASET_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise _schema_error(exc, source) from None

    videos = []
    for i, v in enumerate(doc["videos"]):
        try:
            videos.append(VideoRecord(v["video_id"], v["n_frames"], v["fps"]))
        except DataError as exc:
            raise DataError(f"{source}: $.videos[{i}]: {exc}") from None
    known = {v.video_id: v for v in videos}

    def check_key(section, vid):
        if vid not in known:
            raise DataError(f"{source}: $.{section}.{vid}: no such video in $.videos")
        return known[vid]

    annotations = {}
    for vid, rows in doc.get("annotations", {}).items():
        rec = check_key("annotations", vid)
        scores = []
        for k, row in enumerate(rows):
            where = f"$.annotations.{vid}[{k}]"
            if len(row) != rec.n_frames:
                raise DataError(f"{source}: {where}: {len(row)} scores for {rec.n_frames} frames")
            if not all(math.isfinite(x) for x in row):
                raise DataError(f"{source}: {where}: non-finite score")
            scores.append(FrameScores(vid, row))
        annotations[vid] = AnnotationSet(vid, scores)

    references = None
    if "reference_masks" in doc:
        references = {}
        for vid, rows in doc["reference_masks"].items():
            rec = check_key("reference_masks", vid)
            masks = []
            for k, row in enumerate(rows):
                if len(row) != rec.n_frames:
                    raise DataError(
                        f"{source}: $.reference_masks.{vid}[{k}]: {len(row)} labels for {rec.n_frames} frames"
                    )
                masks.append(SummaryMask(vid, row))
            references[vid] = masks

    features = None
    if "features" in doc:
        features = {}
        for vid, rows in doc["features"].items():
            rec = check_key("features", vid)
            where = f"$.features.{vid}"
            if len(rows) != rec.n_frames:
                raise DataError(f"{source}: {where}: {len(rows)} feature rows for {rec.n_frames} frames")
            if len({len(r) for r in rows}) > 1:
                raise DataError(f"{source}: {where}: feature rows have differing dimensions")
            arr = np.asarray(rows, dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise DataError(f"{source}: {where}: non-finite feature value")
            arr.setflags(write=False)
            features[vid] = arr

    try:
        return DatasetBundle(
            tuple(videos),
            annotations,
            references,
            features,
            doc.get("reference_max_fraction"),
            doc.get("meta", {}),
        )
    except DataError as exc:
        raise DataError(f"{source}: {exc}") from None


def load_json_dataset(path) -> DatasetBundle:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from None
    return bundle_from_dict(doc, path)


def _plain(values) -> list:
    arr = np.asarray(values)
    if arr.dtype == bool or np.all(arr == np.round(arr)):
        return [int(x) for x in arr]
    return arr.tolist()


def bundle_to_dict(bundle: DatasetBundle) -> dict:
    doc = {"videos": [{"video_id": v.video_id, "n_frames": v.n_frames, "fps": v.fps} for v in bundle.videos]}
    doc["annotations"] = {vid: [_plain(a.values) for a in ann.annotators] for vid, ann in bundle.annotations.items()}
    if bundle.reference_masks is not None:
        doc["reference_masks"] = {vid: [_plain(m.mask) for m in ms] for vid, ms in bundle.reference_masks.items()}
    if bundle.features is not None:
        doc["features"] = {vid: np.asarray(f).tolist() for vid, f in bundle.features.items()}
    if bundle.reference_max_fraction is not None:
        doc["reference_max_fraction"] = bundle.reference_max_fraction
    if bundle.meta:
        doc["meta"] = bundle.meta
    return doc


def write_json_dataset(bundle: DatasetBundle, path) -> None:
    text = json.dumps(bundle_to_dict(bundle), separators=(",", ":"))
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_dataset(path, meta_path=None) -> DatasetBundle:
    """Pick the loader from the file suffix (``.tsv`` or ``.json``)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset {path} not found")
    if path.suffix.lower() in (".tsv", ".txt"):
        return load_tvsum_tsv(path, meta_path)
    return load_json_dataset(path)


# ---------------------------------------------------------------- predictions


def predictions_from_dict(doc: dict, bundle: DatasetBundle, source="<predictions>") -> dict:
    try:
        jsonschema.validate(doc, PREDICTION_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise _schema_error(exc, source) from None
    unknown = sorted(set(doc) - set(bundle.video_ids))
    if unknown:
        raise DataError(f"{source}: unknown video ids {unknown}")
    missing = [v for v in bundle.video_ids if v not in doc]
    if missing:
        raise DataError(f"{source}: missing predictions for video ids {missing}")
    out = {}
    for vid in bundle.video_ids:
        row = doc[vid]
        n = bundle.video(vid).n_frames
        if len(row) != n:
            raise DataError(f"{source}: $.{vid}: {len(row)} scores for {n} frames")
        if not all(math.isfinite(x) for x in row):
            raise DataError(f"{source}: $.{vid}: non-finite score")
        out[vid] = FrameScores(vid, row)
    return out


def load_prediction_scores(path, bundle: DatasetBundle) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from None
    return predictions_from_dict(doc, bundle, path)


def write_prediction_scores(preds: dict, path) -> None:
    doc = {vid: np.asarray(fs.values).tolist() for vid, fs in preds.items()}
    Path(path).write_text(json.dumps(doc, separators=(",", ":")) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- synthesis


@dataclass(frozen=True)
class SynthConfig:
    """Synthetic TVSum-like dataset.

    Each video has a latent importance profile (``n_events`` Gaussian bumps
    on a low baseline). Inlier annotators report the profile plus Gaussian
    noise of ``base_noise`` (in score units) per 2-second shot, rounded to
    1..5; outliers report the mirror image ``6 - score``. Features are
    piecewise-constant random vectors that change at event edges.
    """

    n_videos: int = 10
    n_frames_min: int = 1200
    n_frames_max: int = 2400
    fps: float = 30.0
    n_annotators: int = 20
    n_events: int = 4
    base_noise: float = 1.5
    outlier_fraction: float = 0.1
    seed: int = 0
    feature_dim: int = 16
    reference_masks: bool = False

    def __post_init__(self):
        for name in ("n_videos", "n_frames_min", "n_annotators", "n_events", "feature_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_frames_max < self.n_frames_min:
            raise ValueError("n_frames_max must be >= n_frames_min")
        if not self.fps > 0:
            raise ValueError("fps must be positive")
        if self.base_noise < 0:
            raise ValueError("base_noise must be >= 0")
        if not 0.0 <= self.outlier_fraction <= 1.0:
            raise ValueError("outlier_fraction must lie in [0, 1]")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def n_outliers(self) -> int:
        return int(math.floor(self.outlier_fraction * self.n_annotators + 0.5))

    @classmethod
    def from_dict(cls, doc: dict) -> "SynthConfig":
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise DataError(f"unknown synth config keys: {sorted(unknown)}")
        return cls(**doc)

    def to_dict(self) -> dict:
        return asdict(self)


def _synth_video(cfg: SynthConfig, index: int):
    vid = f"synth{index:03d}"
    rng = make_rng(cfg.seed, "synth", vid)
    n = int(rng.integers(cfg.n_frames_min, cfg.n_frames_max + 1))
    rec = VideoRecord(vid, n, cfg.fps)

    slot = n / cfg.n_events
    t = np.arange(n)
    profile = np.full(n, 0.1)
    edges = set()
    for e in range(cfg.n_events):
        center = (e + 0.5 + rng.uniform(-0.2, 0.2)) * slot
        half = rng.uniform(0.15, 0.3) * slot
        height = rng.uniform(0.6, 1.0)
        profile += height * np.exp(-0.5 * ((t - center) / (half / 2)) ** 2)
        edges.update((int(round(center - half)), int(round(center + half))))
    edges = sorted(b for b in edges if 0 < b < n)

    per_shot = max(1, int(round(TVSUM_SHOT_SECONDS * cfg.fps)))
    n_shots = -(-n // per_shot)
    padded = np.concatenate([profile, np.full(n_shots * per_shot - n, profile[-1])])
    clean = 1.0 + 4.0 * np.clip(padded.reshape(n_shots, per_shot).mean(axis=1), 0.0, 1.0)

    first_outlier = cfg.n_annotators - cfg.n_outliers
    annotators = []
    for k in range(cfg.n_annotators):
        base = clean if k < first_outlier else 6.0 - clean
        noisy = base + rng.normal(0.0, cfg.base_noise, n_shots) if cfg.base_noise > 0 else base
        shots = np.clip(np.rint(noisy), 1, 5)
        annotators.append(expand_shot_scores(shots, TVSUM_SHOT_SECONDS, rec))

    block_bounds = [0, *edges, n]
    vectors = rng.normal(0.0, 1.0, (len(block_bounds) - 1, cfg.feature_dim))
    features = np.repeat(vectors, np.diff(block_bounds), axis=0)
    features.setflags(write=False)
    return rec, AnnotationSet(vid, annotators), features, edges


def synth_dataset(cfg: SynthConfig) -> DatasetBundle:
    """Deterministic synthetic bundle; ``meta`` records the generator's
    change points and outlier annotator indices."""
    videos, annotations, features, events = [], {}, {}, {}
    for i in range(cfg.n_videos):
        rec, ann, feats, edges = _synth_video(cfg, i)
        videos.append(rec)
        annotations[rec.video_id] = ann
        features[rec.video_id] = feats
        events[rec.video_id] = edges
    references = None
    if cfg.reference_masks:
        references = {
            v.video_id: tvsum_reference_summaries(annotations[v.video_id], segment_uniform(v, 60), 0.15)
            for v in videos
        }
    meta = {
        "synth_config": cfg.to_dict(),
        "change_points": events,
        "outlier_annotators": list(range(cfg.n_annotators - cfg.n_outliers, cfg.n_annotators)),
    }
    return DatasetBundle(
        tuple(videos),
        annotations,
        references,
        features,
        0.15 if cfg.reference_masks else None,
        meta,
    )
