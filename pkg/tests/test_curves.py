import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from vsumeval.curves import (
    accumulate_curve,
    annotator_curves,
    curve_bounds,
    curves_to_svg,
    emit_curves,
    mean_reference_scores,
    random_baseline,
)
from vsumeval.datamodel import AnnotationSet, DataError, FrameScores
from vsumeval.ingest import SynthConfig, synth_dataset

SVG_NS = "{http://www.w3.org/2000/svg}"


def fs(values):
    return FrameScores("v", values)


def ann_from(rows):
    return AnnotationSet("v", [fs(r) for r in rows])


def check_invariants(curve):
    p = curve.points
    assert np.all(np.diff(p) >= -1e-12)
    assert abs(p[-1] - 1.0) <= 1e-9
    assert p.min() >= -1e-12 and p.max() <= 1 + 1e-12


class TestMeanReference:
    def test_single(self):
        assert mean_reference_scores(ann_from([[1, 2, 3]])) == fs([1, 2, 3])

    def test_constant(self):
        np.testing.assert_array_equal(mean_reference_scores(ann_from([[1] * 4, [5] * 4])).values, [3] * 4)

    def test_symmetric(self):
        np.testing.assert_array_equal(mean_reference_scores(ann_from([[1, 5], [5, 1]])).values, [3, 3])


class TestAccumulate:
    def test_constant_reference_is_diagonal(self):
        c = accumulate_curve(np.random.default_rng(0).random(7), fs(np.full(7, 2.0)))
        np.testing.assert_allclose(c.points, np.arange(1, 8) / 7, atol=1e-15)

    def test_perfect_concordance_hits_upper(self):
        ref = fs(np.random.default_rng(1).permutation(10) + 1.0)
        bounds = curve_bounds(ref)
        np.testing.assert_array_equal(accumulate_curve(ref.values, ref).points, bounds["upper"].points)
        np.testing.assert_array_equal(accumulate_curve(-ref.values, ref).points, bounds["lower"].points)

    def test_zero_reference(self):
        with pytest.raises(DataError):
            accumulate_curve(np.ones(3), fs(np.zeros(3)))

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            accumulate_curve(np.ones(3), fs(np.ones(4)))

    def test_ties_by_frame_index(self):
        c = accumulate_curve(np.array([1.0, 1.0, 0.0]), fs([1.0, 3.0, 0.0]))
        np.testing.assert_allclose(c.points, [0.25, 1.0, 1.0])

    @settings(max_examples=1000)
    @given(st.integers(1, 60).flatmap(lambda n: st.tuples(
        arrays(float, n, elements=st.floats(-10, 10)),
        arrays(float, n, elements=st.floats(0, 5)),
    )))
    def test_within_bounds(self, pair):
        pred, ref = pair
        if ref.sum() <= 0:
            return
        c = accumulate_curve(pred, fs(ref))
        b = curve_bounds(fs(ref))
        check_invariants(c)
        assert np.all(c.points <= b["upper"].points + 1e-12)
        assert np.all(c.points >= b["lower"].points - 1e-12)
        assert np.all(b["upper"].points >= b["lower"].points - 1e-12)

    @given(st.integers(2, 30), st.integers(0, 2**32 - 1))
    def test_permuting_tied_frames_with_equal_reference(self, n, seed):
        rng = np.random.default_rng(seed)
        pred = rng.integers(0, 3, n).astype(float)
        ref = np.empty(n)
        # reference constant within each group of tied predictions
        for v in np.unique(pred):
            ref[pred == v] = rng.random() + 0.1
        a = accumulate_curve(pred, fs(ref)).points
        perm = rng.permutation(n)
        b = accumulate_curve(pred[perm], fs(ref[perm])).points
        np.testing.assert_allclose(a, b, atol=1e-12)


class TestBounds:
    def test_constant(self):
        b = curve_bounds(fs(np.full(5, 2.0)))
        np.testing.assert_allclose(b["upper"].points, np.arange(1, 6) / 5)
        np.testing.assert_allclose(b["lower"].points, np.arange(1, 6) / 5)

    def test_one_hot(self):
        b = curve_bounds(fs([0.0, 0.0, 1.0, 0.0]))
        assert b["upper"].points.tolist() == [1, 1, 1, 1]
        assert b["lower"].points.tolist() == [0, 0, 0, 1]


class TestBaseline:
    def test_n4(self):
        assert random_baseline(4).points.tolist() == [0.25, 0.5, 0.75, 1.0]

    def test_n1(self):
        assert random_baseline(1).points.tolist() == [1.0]

    def test_monte_carlo(self):
        rng = np.random.default_rng(0)
        ref = fs(rng.integers(1, 6, 50).astype(float))
        mean = np.mean([accumulate_curve(rng.random(50), ref).points for _ in range(10_000)], axis=0)
        assert np.max(np.abs(mean - random_baseline(50).points)) < 0.01


class TestAnnotatorCurves:
    def test_identical(self):
        row = np.random.default_rng(2).permutation(12) + 1.0
        ann = ann_from([row, row, row])
        upper = curve_bounds(mean_reference_scores(ann))["upper"].points
        for c in annotator_curves(ann):
            np.testing.assert_array_equal(c.points, upper)

    def test_two_reversed(self):
        row = np.arange(1.0, 9.0)
        ann = ann_from([row, 9.0 - row])
        c0, c1 = annotator_curves(ann)
        np.testing.assert_allclose(c0.points, curve_bounds(fs(9.0 - row))["lower"].points)
        np.testing.assert_allclose(c1.points, curve_bounds(fs(row))["lower"].points)

    def test_needs_two(self):
        with pytest.raises(DataError):
            annotator_curves(ann_from([[1, 2]]))

    def test_outliers_fall_below_baseline(self):
        b = synth_dataset(SynthConfig(n_videos=3, n_annotators=10, outlier_fraction=0.2, seed=4))
        outliers = b.meta["outlier_annotators"]
        assert outliers == [8, 9]
        for ann in b.annotations.values():
            curves = annotator_curves(ann)
            base = random_baseline(ann.n_frames).points
            for c in curves:
                check_invariants(c)
            area = np.array([np.mean(c.points - base) for c in curves])
            assert np.all(area[outliers] < 0)
            assert set(np.argsort(area)[: len(outliers)]) == set(outliers)
            prefix = ann.n_frames // 10
            assert any(np.all(curves[k].points[:prefix] < base[:prefix]) for k in outliers)


class TestEmit:
    def setup_method(self):
        ref = fs([3.0, 1.0, 2.0])
        self.curves = [accumulate_curve([0.2, 0.9, 0.1], ref, "model")]
        self.bounds = curve_bounds(ref)
        self.baseline = random_baseline(3)

    def test_csv_layout(self, tmp_path):
        path = emit_curves(self.curves, self.bounds, self.baseline, tmp_path / "c.csv", "csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "i,model,upper,lower,baseline"
        assert len(lines) == 4
        assert lines[3].split(",")[1:] == ["1.0", "1.0", "1.0", "1.0"]

    def test_deterministic_bytes(self, tmp_path):
        for fmt in ("csv", "svg"):
            a = emit_curves(self.curves, self.bounds, self.baseline, tmp_path / f"a.{fmt}", fmt, "t")
            b = emit_curves(self.curves, self.bounds, self.baseline, tmp_path / f"b.{fmt}", fmt, "t")
            assert a.read_bytes() == b.read_bytes()

    def test_svg_structure(self, tmp_path):
        two = self.curves + [accumulate_curve([0.5, 0.5, 0.5], fs([3.0, 1.0, 2.0]), "flat")]
        path = emit_curves(two, self.bounds, self.baseline, tmp_path / "c.svg", "svg", "v", "config echo")
        root = ET.parse(path).getroot()
        assert root.tag == f"{SVG_NS}svg"
        assert (root.get("width"), root.get("height")) == ("800", "500")
        curves = [p for p in root.iter(f"{SVG_NS}polyline") if p.get("class") == "curve"]
        assert [p.get("data-label") for p in curves] == ["model", "flat"]
        assert len([p for p in root.iter(f"{SVG_NS}polygon") if p.get("class") == "bounds"]) == 1
        assert root.find(f"{SVG_NS}desc").text == "config echo"

    def test_svg_downsampled(self):
        n = 5000
        ref = fs(np.random.default_rng(0).random(n) + 0.1)
        svg = curves_to_svg([accumulate_curve(ref.values, ref)], curve_bounds(ref), random_baseline(n))
        root = ET.fromstring(svg)
        line = next(p for p in root.iter(f"{SVG_NS}polyline") if p.get("class") == "curve")
        assert len(line.get("points").split()) <= 2000

    def test_bad_format_and_lengths(self, tmp_path):
        with pytest.raises(ValueError):
            emit_curves(self.curves, self.bounds, self.baseline, tmp_path / "c.png", "png")
        with pytest.raises(DataError):
            emit_curves(self.curves, self.bounds, random_baseline(4), tmp_path / "c.csv")
