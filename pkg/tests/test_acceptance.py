"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line."""

import time
from pathlib import Path

import numpy as np

from javrc import harness
from javrc.allocator import (
    CurvePair,
    RateModel,
    arbitrary_allocate,
    audio_first_allocate,
    brute_force_allocate,
    dp_allocate,
    greedy_allocate,
    rate_coverage_series,
)
from javrc.config import config_from_dict
from javrc.coverage import PointSet, brute_force_cover, coverage_curve, curve_from_csv, rkcp3
from javrc.fingerprint import (
    MODALITY_AUDIO,
    MODALITY_VIDEO,
    FingerprintParams,
    audio_fingerprint,
    decode_javf,
    encode_javf,
    video_fingerprint,
)
from javrc.ingest import Frame, SyntheticCloudSpec, read_wav, synth_points
from javrc.retrieval import build_database, decode_database, encode_database, evaluate_accuracy, representatives_for

DATA = Path(__file__).parent / "data"
RM = RateModel(160, 32, 0)


def _random_instance(rng):
    nv, na = rng.integers(0, 21, size=2)
    fv = np.concatenate([[0], np.cumsum(rng.integers(0, 8, nv))])
    fa = np.concatenate([[0], np.cumsum(rng.integers(0, 8, na))])
    cv, ca = (int(x) for x in rng.integers(1, 60, size=2))
    budget = int(rng.integers(0, cv * nv + ca * na + 10))
    alpha = float(rng.choice([0.0, 0.2, 0.5, 0.7, 1.0]))
    return CurvePair.from_arrays(fv, fa, max(fv[-1], 1), max(fa[-1], 1)), RateModel(cv, ca, budget), alpha


def _cloud_curves(seed, vspread, aspread, rv, ra, K=16, nv=120, na=90):
    v = synth_points(SyntheticCloudSpec(n_points=nv, n_clusters=10, spread=vspread, dimension=1280, seed=seed))
    a = synth_points(SyntheticCloudSpec(n_points=na, n_clusters=8, spread=aspread, dimension=8, kind="keys", seed=seed + 7919))
    cv = coverage_curve(PointSet.from_labeled(v), rv, K)
    ca = coverage_curve(PointSet.from_labeled(a), ra, K)
    return CurvePair.from_curves(cv, ca)


def _grid(curves, rm=RM, points=40):
    return [int(b) for b in np.rint(np.linspace(0, rm.total_bytes(curves), points))]


def test_c01_dp_exact(criterion):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    n, bad = 300, 0
    for _ in range(n):
        curves, rm, alpha = _random_instance(rng)
        if dp_allocate(curves, rm, alpha).coverage != brute_force_allocate(curves, rm, alpha).coverage:
            bad += 1
    elapsed = time.perf_counter() - t0
    criterion(1, "DP equals brute force exactly", bad == 0 and elapsed < 10, f"{n} instances, {bad} mismatches, {elapsed:.2f}s")


def test_c02_knapsack_counterexample(criterion):
    # rectangles 99 bytes / value 10, circle 100 bytes / value 15, limit 198
    curves = CurvePair.from_arrays([0, 10, 20], [0, 15], n_video=0.5, n_audio=0.5)
    rm = RateModel(99, 100, 198)
    g, d = greedy_allocate(curves, rm, 0.5).coverage, dp_allocate(curves, rm, 0.5).coverage
    # with the rectangle/circle weights read as 100/99 two rectangles overflow the limit
    literal = dp_allocate(curves, RateModel(100, 99, 198), 0.5).coverage
    criterion(
        2,
        "greedy 15, DP 20 on the knapsack counterexample",
        (g, d) == (15, 20),
        f"greedy={g}, dp={d}",
        info=f"with rectangles 100 / circle 99 the optimum is {literal}: two rectangles need 200 > 198",
    )


def test_c03_dominance(criterion):
    violations = checks = 0
    for k in range(50):
        curves = _cloud_curves(100 + k, vspread=[4, 40, 120][k % 3], aspread=k % 5, rv=40, ra=0.25 + 0.125 * (k % 3))
        alpha = [0.25, 0.5, 0.75][k % 3]
        for res in rate_coverage_series("dp", curves, RM, alpha, _grid(curves)):
            rm = RM.with_budget(res.budget)
            g = greedy_allocate(curves, rm, alpha).coverage
            ok = (
                res.coverage >= g >= 0
                and res.coverage >= audio_first_allocate(curves, rm, alpha).coverage
                and res.coverage >= arbitrary_allocate(curves, rm, alpha).coverage
            )
            violations += not ok
            checks += 1
    criterion(3, "dp >= greedy, audio_first, arbitrary", violations == 0, f"50 datasets, {checks} budgets, {violations} violations")


def test_c04_three_approximation(criterion):
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    violations = n = 0
    for k in range(120):
        size = int(rng.integers(1, 21))
        if k % 2:
            ps = PointSet.from_vectors(rng.integers(0, 30, size=(size, 2)))
            r = float(rng.integers(0, 8))
        else:
            ps = PointSet.from_bits(rng.integers(0, 256, size=(size, 2), dtype=np.uint8))
            r = float(rng.integers(0, 6))
        kk = int(rng.integers(1, 4))
        violations += rkcp3(ps, kk, r, mode="approx").covered_total < brute_force_cover(ps, kk, r)
        n += 1
    elapsed = time.perf_counter() - t0
    criterion(4, "expanded-disk greedy >= optimum at r", violations == 0 and elapsed < 30, f"{n} instances, {violations} violations, {elapsed:.2f}s")


def test_c05_curve_laws(criterion):
    rng = np.random.default_rng(5)
    failures = []
    for k in range(20):
        n = int(rng.integers(5, 60))
        ps = PointSet.from_vectors(rng.integers(0, 50, size=(n, 2)))
        r = float(rng.integers(0, 10))
        K = int(rng.integers(1, 8))
        capped = coverage_curve(ps, r, k_cap=K).f
        free = coverage_curve(ps, r).f
        steps, gains = np.diff(capped), np.diff(free)
        if not (capped[0] == 0 and free[0] == 0 and np.all(steps >= 0) and np.all(steps <= K)):
            failures.append((k, "monotone/cap"))
        if np.any(np.diff(gains) > 0):
            failures.append((k, "gains"))
        for i in rng.integers(0, n + 1, size=3):
            if rkcp3(ps, int(i), r, K, mode="strict").covered_total != capped[i]:
                failures.append((k, "prefix"))
    criterion(5, "coverage-curve laws", not failures, f"20 instances, failures={failures}")


def _db_for(res, cv, ca, vpts, akeys, K, rv, ra):
    abytes = akeys.astype("<u4").view(np.uint8).reshape(len(akeys), 32)
    return build_database(
        res, representatives_for(cv.reps, res.n_video), representatives_for(ca.reps, res.n_audio), vpts, abytes, RM, K, rv, ra
    )


def _accuracy_gap(seed, vspread, aspread, K):
    v = synth_points(SyntheticCloudSpec(n_points=600, n_clusters=30, spread=vspread, dimension=1280, seed=seed))
    a = synth_points(SyntheticCloudSpec(n_points=500, n_clusters=25, spread=aspread, dimension=8, kind="keys", seed=seed + 1))
    rv, ra = max(vspread, 1), min(0.75, aspread / 8 + 0.125)
    cv = coverage_curve(PointSet.from_labeled(v), rv, K)
    ca = coverage_curve(PointSet.from_labeled(a), ra, K)
    curves = CurvePair.from_curves(cv, ca)
    exact, worst = True, 0.0
    for res in rate_coverage_series("dp", curves, RM, 0.5, _grid(curves, points=8)):
        db = _db_for(res, cv, ca, v.points, a.points, K, rv, ra)
        for modality, corpus in (("video", v.points), ("audio", a.points)):
            if (db.n_video if modality == "video" else db.n_audio) == 0:
                continue
            cov = db.coverage(modality)
            probe = evaluate_accuracy(db, modality, corpus, range(len(corpus)), "probe_all").expected_accuracy
            near = evaluate_accuracy(db, modality, corpus, range(len(corpus)), "nearest").expected_accuracy
            exact &= probe == cov
            worst = max(worst, cov - near)
            exact &= near <= cov
    return exact, worst


def test_c06_coverage_accuracy(criterion):
    # cluster size 20 <= K: every cluster fits one cover set
    results = [_accuracy_gap(60 + k, vs, as_, K=32) for k, (vs, as_) in enumerate([(0, 2), (40, 0), (120, 4), (300, 2)])]
    exact = all(e for e, _ in results)
    worst = max(w for _, w in results)
    # clusters larger than K split across co-located representatives
    _, split = _accuracy_gap(70, 40, 2, K=16)
    criterion(
        6,
        "probe_all = coverage, nearest within 0.15",
        exact and worst <= 0.15,
        f"4 corpora of 600+500 points, worst gap {worst:.3f}",
        info=f"clusters of 20 with K=16 give a nearest-mode gap of {split:.3f}",
    )


def test_c07_full_budget(criterion):
    bad = []
    for seed in range(10):
        curves = _cloud_curves(200 + seed, vspread=30, aspread=2, rv=40, ra=0.375)
        rm = RM.with_budget(RM.total_bytes(curves))
        for alpha in (0.0, 0.25, 0.5, 0.75, 1.0):
            for fn in (arbitrary_allocate, audio_first_allocate, greedy_allocate, dp_allocate):
                if fn(curves, rm, alpha).coverage != 1.0:
                    bad.append((seed, alpha, fn.__name__))
    criterion(7, "all methods reach 1.0 at the full budget", not bad, f"10 datasets x 5 alphas, failures={bad}")


def test_c08_media_patterns(criterion):
    violations = checks = 0
    for seed in range(10):
        tight = _cloud_curves(300 + seed, vspread=8, aspread=1, rv=40, ra=0.25)
        diffuse = _cloud_curves(300 + seed, vspread=200, aspread=5, rv=40, ra=0.25)
        grid = _grid(tight)
        assert grid == _grid(diffuse)
        st = rate_coverage_series("dp", tight, RM, 0.5, grid)
        sd = rate_coverage_series("dp", diffuse, RM, 0.5, grid)
        violations += sum(a.coverage < b.coverage for a, b in zip(st, sd))
        checks += len(grid)
    criterion(8, "tight-cluster curve dominates diffuse", violations == 0, f"10 pairs, {checks} budgets, {violations} violations")


def test_c09_threshold_and_alpha(criterion):
    nested = alpha_bad = 0
    for seed in range(10):
        levels = [(20, 0.125), (60, 0.25), (120, 0.5), (200, 0.75)]
        series = []
        for rv, ra in levels:
            curves = _cloud_curves(400 + seed, vspread=60, aspread=3, rv=rv, ra=ra)
            # same point counts at every threshold, hence the same grid
            grid = _grid(curves)
            series.append([r.coverage for r in rate_coverage_series("dp", curves, RM, 0.5, grid)])
        nested += sum(a > b for lo, hi in zip(series, series[1:]) for a, b in zip(lo, hi))
        curves = _cloud_curves(400 + seed, vspread=60, aspread=3, rv=60, ra=0.25)
        for b in _grid(curves):
            v = rate_coverage_series("dp", curves, RM, 1.0, [b])[0].coverage
            a = rate_coverage_series("dp", curves, RM, 0.0, [b])[0].coverage
            nv = min(curves.max_video, b // RM.cost_video)
            na = min(curves.max_audio, b // RM.cost_audio)
            alpha_bad += v != curves.video[nv] / curves.n_video
            alpha_bad += a != curves.audio[na] / curves.n_audio
    criterion(9, "nested thresholds ordered, alpha endpoints single-modality", nested == 0 and alpha_bad == 0, f"{nested} ordering and {alpha_bad} endpoint violations")


def test_c10_golden_and_roundtrip(criterion):
    yy, xx = np.mgrid[0:48, 0:64]
    img = ((7 * xx + 3 * yy + (xx * yy) % 17) % 256).astype(np.uint8)
    fp = video_fingerprint(Frame(img), FingerprintParams())
    video_ok = len(fp.to_bytes()) == 160 and fp.to_bytes().hex() == (DATA / "golden_video_fp.hex").read_text().strip()
    units, segs = audio_fingerprint(read_wav(DATA / "golden.wav"))
    audio_ok = [f"{u.key:08x}:{u.timestamp}" for u in units] == (DATA / "golden_units.txt").read_text().split()
    vblob = encode_javf(MODALITY_VIDEO, 160, [fp.to_bytes()] * 3)
    ablob = encode_javf(MODALITY_AUDIO, 32, [s.to_bytes() for s in segs])
    javf_ok = all(encode_javf(m, w, recs) == blob for blob in (vblob, ablob) for m, w, recs, _ in [decode_javf(blob)])
    v = synth_points(SyntheticCloudSpec(n_points=60, n_clusters=6, spread=10, dimension=1280, seed=1))
    a = synth_points(SyntheticCloudSpec(n_points=40, n_clusters=5, spread=2, dimension=8, kind="keys", seed=2))
    cv, ca = coverage_curve(PointSet.from_labeled(v), 20, 8), coverage_curve(PointSet.from_labeled(a), 0.5, 8)
    res = dp_allocate(CurvePair.from_curves(cv, ca), RM.with_budget(1200), 0.5)
    blob = encode_database(_db_for(res, cv, ca, v.points, a.points, 8, 20, 0.5))
    javd_ok = encode_database(decode_database(blob)) == blob
    ok = video_ok and audio_ok and javf_ok and javd_ok
    criterion(10, "golden vectors and byte-identical round trips", ok, f"video={video_ok}, audio={audio_ok}, javf={javf_ok}, javd={javd_ok}")


def test_c11_end_to_end(criterion, tmp_path):
    cfg = config_from_dict(
        {
            "out": str(tmp_path),
            "dataset": {"kind": "synthetic", "n_frames": 200, "audio_seconds": 60.0},
            "allocate": {"methods": ["arbitrary", "audio_first", "greedy", "dp", "lagrangian"]},
        }
    )
    t0 = time.perf_counter()
    harness.cmd_fingerprint(cfg)
    meta = harness.cmd_curves(cfg)
    harness.cmd_allocate(cfg)
    harness.cmd_evaluate(cfg)
    elapsed = time.perf_counter() - t0
    for name in ("f_V.csv", "f_A.csv"):
        curve_from_csv((tmp_path / name).read_text()).check()
    outputs = ["rate_coverage.csv", "coverage_accuracy.csv", "summary_table.csv", "database.javd", "query_log.csv"]
    ok = elapsed < 60 and all((tmp_path / f).exists() for f in outputs)
    criterion(11, "200 frames + 60 s audio end to end", ok, f"{elapsed:.2f}s, video points={meta['n_video']}, audio points={meta['n_audio']}")
