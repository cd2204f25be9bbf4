"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Criteria 3, 4 and the TVSum half of 6 need the public TVSum annotation file
under ``$VSUMEVAL_DATA_ROOT/tvsum/`` (``ydata-tvsum50-anno.tsv`` plus the
``videos.json`` sidecar written by ``scripts/make_tvsum_sidecar.py``). When
it is absent those criteria fail with an explanatory message.
"""

import itertools
import json
import time
import warnings
from collections import Counter

import numpy as np
import pytest

from conftest import tvsum_paths
from oracles import rho_explicit, tau_b_pairs, tied_vector_pair
from vsumeval.cli import main
from vsumeval.curves import accumulate_curve, curve_bounds
from vsumeval.datamodel import FrameScores, Segmentation, SummaryMask, VideoRecord, validate_segmentation
from vsumeval.harness import ExperimentConfig, run_budget_sweep, run_experiment, run_rank_eval, run_selection_bias
from vsumeval.ingest import SynthConfig, load_tvsum_tsv, synth_dataset, write_json_dataset
from vsumeval.metrics import DegenerateCorrelationWarning, f1_matrix, f1_score, kendall_tau_b, spearman_rho
from vsumeval.segmentation import (
    Kts,
    OnePeak,
    RandomizedKts,
    TwoPeak,
    Uniform,
    kts_objective,
    make_segmenter,
    randomize_kts,
    scatter_matrix,
    segment,
    segment_kts,
)
from vsumeval.selection import SegmentScores, brute_force_select, knapsack_select

PINNED_SHARE_OF_SHORT = 0.9662
SWEEP = (0.15, 0.25, 0.35)


def verdict(capsys, label, ok, detail=""):
    with capsys.disabled():
        print(f"\n[acceptance] {label}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, f"{label}: {detail}"


@pytest.fixture(scope="module")
def tvsum():
    paths = tvsum_paths()
    return load_tvsum_tsv(*paths) if paths else None


def no_tvsum(capsys, label):
    verdict(
        capsys,
        label,
        False,
        "TVSum annotation file not found: set VSUMEVAL_DATA_ROOT to a directory holding "
        "tvsum/ydata-tvsum50-anno.tsv and tvsum/videos.json",
    )


def test_c1_knapsack_oracle_equivalence(capsys):
    rng = np.random.default_rng(1)
    instances = []
    for _ in range(1000):
        s = int(rng.integers(1, 16))
        lengths = rng.integers(1, 121, s)
        values = rng.random(s) if rng.random() < 0.7 else rng.integers(0, 5, s) / 4
        seg = Segmentation.from_lengths("v", lengths)
        instances.append((SegmentScores("v", seg, values, "mean"), int(rng.integers(0, lengths.sum() + 1))))
    start = time.perf_counter()
    got = [knapsack_select(s, cap) for s, cap in instances]
    elapsed = time.perf_counter() - start
    mismatches = sum(g != brute_force_select(s, cap) for g, (s, cap) in zip(got, instances))
    verdict(capsys, "C1 knapsack == brute force", mismatches == 0 and elapsed < 5,
            f"{mismatches} mismatches / 1000, knapsack time {elapsed:.2f}s")


def test_c2_rank_oracle_equivalence(capsys):
    rng = np.random.default_rng(2)
    pairs = [tied_vector_pair(rng, max_len=200) for _ in range(500)]
    oracle = [(tau_b_pairs(x, y), rho_explicit(x, y)) for x, y in pairs]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateCorrelationWarning)
        start = time.perf_counter()
        got = [(kendall_tau_b(x, y), spearman_rho(x, y)) for x, y in pairs]
        elapsed = time.perf_counter() - start
    err = max(max(abs(a - c), abs(b - d)) for (a, b), (c, d) in zip(got, oracle))
    verdict(capsys, "C2 tau-b / rho == oracles", err <= 1e-12 and elapsed < 5,
            f"max abs error {err:.2e}, time {elapsed:.2f}s")


def test_c3_tvsum_rank_correlations(capsys, tvsum):
    label = "C3 TVSum rank correlations (human LOO 0.177/0.204, random ~0)"
    if tvsum is None:
        no_tvsum(capsys, label)
    start = time.perf_counter()
    loo = run_rank_eval(tvsum, "loo")
    rnd = run_rank_eval(tvsum, "random", trials=100, master_seed=0)
    elapsed = time.perf_counter() - start
    ok = (
        abs(loo.tau - 0.177) <= 0.01
        and abs(loo.rho - 0.204) <= 0.01
        and abs(rnd.tau) <= 0.005
        and abs(rnd.rho) <= 0.005
        and elapsed < 120
    )
    verdict(capsys, label, ok, f"human tau={loo.tau:.4f} rho={loo.rho:.4f}; random tau={rnd.tau:.4f} "
            f"rho={rnd.rho:.4f}; {elapsed:.1f}s")


def test_c4_tvsum_two_peak_random_f1(capsys, tvsum):
    label = "C4 TVSum two-peak random F1 (0.58/0.71)"
    if tvsum is None:
        no_tvsum(capsys, label)
    start = time.perf_counter()
    rep = run_experiment(tvsum, ExperimentConfig(segmenter=TwoPeak(), trials=100, master_seed=0))
    elapsed = time.perf_counter() - start
    ok = abs(rep.avg_f1 - 0.58) <= 0.03 and abs(rep.max_f1 - 0.71) <= 0.03 and elapsed < 300
    verdict(capsys, label, ok, f"avg={rep.avg_f1:.4f} max={rep.max_f1:.4f}; {elapsed:.1f}s")


def test_c5_selection_bias(capsys, synth_bundle):
    res = run_selection_bias(synth_bundle, ExperimentConfig(segmenter=TwoPeak(), trials=1000, master_seed=0))
    frac, share = res["frac_median_selected_below_unselected"], res["mean_share_of_short"]
    ok = frac >= 0.95 and abs(share - PINNED_SHARE_OF_SHORT) <= 0.02
    verdict(capsys, "C5 selection bias (synthetic)", ok,
            f"median selected < unselected in {frac:.3f} of {res['pairs']} pairs; share_of_short={share:.4f} "
            f"(pinned {PINNED_SHARE_OF_SHORT})")


def sweep_grid(bundle, trials):
    rows = []
    for spec in (Uniform(), OnePeak(), TwoPeak(), Kts(), RandomizedKts()):
        for scorer in ("random", "human"):
            reports = run_budget_sweep(bundle, ExperimentConfig(segmenter=spec, scorer=scorer, trials=trials), SWEEP)
            means = [r.avg_f1 for r in reports]
            rows.append((type(spec).__name__, scorer, means, all(b >= a for a, b in zip(means, means[1:]))))
    return rows


def describe(rows):
    return "; ".join(f"{s}/{c} {'>='.join(f'{m:.3f}' for m in means)}{'' if ok else ' (decreases)'}" for s, c, means, ok in rows)


def test_c6a_budget_sweep_synthetic(capsys, synth_bundle):
    rows = sweep_grid(synth_bundle, trials=30)
    verdict(capsys, "C6a budget sweep non-decreasing (synthetic)", all(r[3] for r in rows), describe(rows))


def test_c6b_budget_sweep_tvsum(capsys, tvsum):
    label = "C6b budget sweep non-decreasing (TVSum)"
    if tvsum is None:
        no_tvsum(capsys, label)
    rows = [r for r in sweep_grid_tvsum(tvsum)]
    verdict(capsys, label, all(r[3] for r in rows), describe(rows))


def sweep_grid_tvsum(bundle):
    # KTS rows need per-frame features, which the annotation file does not carry
    rows = []
    for spec in (Uniform(), OnePeak(), TwoPeak()):
        for scorer in ("random", "human"):
            reports = run_budget_sweep(bundle, ExperimentConfig(segmenter=spec, scorer=scorer, trials=30), SWEEP)
            means = [r.avg_f1 for r in reports]
            rows.append((type(spec).__name__, scorer, means, all(b >= a for a, b in zip(means, means[1:]))))
    return rows


def test_c7_structural_invariants(capsys, tmp_path, small_synth):
    rng = np.random.default_rng(7)
    failures = Counter()

    for case in range(10_000):
        n = int(rng.integers(1, 4000))
        video = VideoRecord("v", n, 30.0)
        method = ("uniform", "one-peak", "two-peak")[case % 3]
        seg = segment(make_segmenter(method, len_frames=int(rng.integers(1, 150))), video, rng=rng)
        failures["segmentation"] += bool(validate_segmentation(seg, video))
        shuffled = randomize_kts(seg, rng)
        failures["randomized-kts multiset"] += Counter(shuffled.lengths.tolist()) != Counter(seg.lengths.tolist())
        failures["randomized-kts validity"] += bool(validate_segmentation(shuffled, video))

    for _ in range(1000):
        n = int(rng.integers(1, 300))
        ref = FrameScores("v", rng.integers(0, 6, n).astype(float) + (rng.random() < 0.5) * rng.random(n))
        if ref.values.sum() <= 0:
            ref = FrameScores("v", np.ones(n))
        pred = rng.normal(size=n) if rng.random() < 0.5 else rng.integers(0, 3, n).astype(float)
        pts = accumulate_curve(pred, ref).points
        b = curve_bounds(ref)
        failures["curve monotone"] += bool(np.any(np.diff(pts) < -1e-12))
        failures["curve a_n = 1"] += abs(pts[-1] - 1) > 1e-9
        failures["curve within bounds"] += bool(
            np.any(pts > b["upper"].points + 1e-12) or np.any(pts < b["lower"].points - 1e-12)
        )

    for _ in range(10_000):
        n = int(rng.integers(1, 100))
        a = rng.random(n) < rng.random()
        c = rng.random(n) < rng.random()
        ab = f1_score(SummaryMask("v", a), SummaryMask("v", c)).f1
        ba = f1_score(SummaryMask("v", c), SummaryMask("v", a)).f1
        total = a.sum() + c.sum()
        closed = 2 * np.sum(a & c) / total if total else 0.0
        failures["f1 symmetry"] += abs(ab - ba) > 1e-12
        failures["f1 closed form"] += abs(ab - closed) > 1e-12 or abs(f1_matrix(a, c)[0, 0] - closed) > 1e-12

    ds = tmp_path / "ds.json"
    write_json_dataset(small_synth, ds)
    outputs = []
    for tag, jobs in (("a", "1"), ("b", "1"), ("c", "3")):
        out = tmp_path / f"{tag}.json"
        args = ["randtest", "--dataset", str(ds), "--trials", "4", "--seed", "11", "--budget", "0.15", "0.35", "--jobs", jobs, "--out", str(out)]
        assert main(args) == 0
        outputs.append((out.read_bytes(), out.with_suffix(".csv").read_bytes()))
        rank = tmp_path / f"{tag}-rank.csv"
        assert main(["rankeval", "--dataset", str(ds), "--random", "--trials", "3", "--jobs", jobs, "--out", str(rank)]) == 0
        outputs[-1] += (rank.read_bytes(),)
    failures["determinism (reruns / --jobs)"] += len(set(outputs)) != 1

    bad = {k: v for k, v in failures.items() if v}
    verdict(capsys, "C7 structural invariants", not bad, f"violations: {bad or 'none'}")


def test_c8_kts_sanity(capsys):
    misses = []
    for s in range(100):
        b = synth_dataset(SynthConfig(n_videos=1, n_frames_min=300, n_frames_max=600, n_annotators=1, seed=s))
        v = b.videos[0]
        truth = b.meta["change_points"][v.video_id]
        found = list(segment_kts(v, b.features[v.video_id]).boundaries[1:-1])
        if len(found) != len(truth) or any(abs(a - c) > 1 for a, c in zip(found, truth)):
            misses.append(s)

    rng = np.random.default_rng(8)
    dp_fail = 0
    for n in range(2, 25):
        for c in (0.0, 0.1, 1.0):
            x = rng.normal(size=(n, 3)) + np.repeat(rng.normal(size=(3, 3)) * 2, [n // 3, n // 3, n - 2 * (n // 3)], axis=0)
            J = scatter_matrix(x)
            m_max = min(3, n)
            best = min(
                kts_objective(J, (0, *cut, n), c)
                for m in range(1, m_max + 1)
                for cut in itertools.combinations(range(1, n), m - 1)
            )
            seg = segment_kts(VideoRecord("v", n, 30.0), x, penalty_c=c, max_segments=m_max)
            dp_fail += abs(kts_objective(J, seg.boundaries, c) - best) > 1e-8
    verdict(capsys, "C8 KTS sanity", not misses and not dp_fail,
            f"boundary misses {len(misses)}/100 {misses[:5]}; DP suboptimal on {dp_fail}/69 brute-force cases")
