"""Pipeline steps behind the CLI: fingerprint -> curves -> allocate -> sweep -> evaluate -> report.

Every step reads its inputs from and writes its outputs to ``cfg.out``; the
same config and seed reproduce byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import csvio
from .allocator import (
    CurvePair,
    RateModel,
    greedy_allocate,
    lagrangian_allocate,
    rate_coverage_series,
    series_rows,
    SERIES_COLUMNS,
)
from .config import ExperimentConfig
from .coverage import CoverageCurve, PointSet, coverage_curve, curve_from_csv, curve_to_csv, rkcp3
from .errors import ConfigError
from .fingerprint import (
    MODALITY_AUDIO,
    MODALITY_VIDEO,
    AudioParams,
    FingerprintParams,
    audio_fingerprint,
    encode_javf,
    fingerprint_frames,
    read_javf,
    records_to_keys,
)
from .ingest import read_frames, read_wav, synth_audio, synth_frames, synth_points
from .retrieval import build_database, encode_database, evaluate_accuracy, representatives_for, LOG_COLUMNS

VIDEO_FILE, AUDIO_FILE = "video.javf", "audio.javf"
CURVE_META = "curves_meta.json"


def _out(cfg: ExperimentConfig) -> Path:
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _fmt(x) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# fingerprint
# ---------------------------------------------------------------------------


def audio_params(cfg: ExperimentConfig) -> AudioParams:
    fp = cfg.fingerprint
    return AudioParams(
        window=fp.window,
        hop=fp.hop,
        nms_time=fp.nms_time,
        nms_freq=fp.nms_freq,
        floor=fp.floor,
        fanout=fp.fanout,
        dt_min=fp.dt_min,
        dt_max=fp.dt_max,
        units_per_segment=fp.units_per_segment,
    )


def cmd_fingerprint(cfg: ExperimentConfig) -> dict:
    out = _out(cfg)
    ds = cfg.dataset
    seg_bytes = 4 * cfg.fingerprint.units_per_segment
    stats: dict = {"kind": ds.kind}
    if ds.kind == "curves":
        stats["note"] = "explicit curves; nothing to fingerprint"
    elif ds.kind == "points":
        video = synth_points(cfg.video_cloud())
        audio = synth_points(cfg.audio_cloud())
        vbytes = video.points.shape[1]
        csvio.write_atomic(out / VIDEO_FILE, encode_javf(MODALITY_VIDEO, vbytes, video.points))
        akeys = audio.points.astype("<u4")
        csvio.write_atomic(out / AUDIO_FILE, encode_javf(MODALITY_AUDIO, seg_bytes, akeys.view(np.uint8)))
        segs = [{"segment_id": i, "start_ms": 0, "end_ms": 0} for i in range(len(audio))]
        csvio.write_csv(out / "audio_segments.csv", ["segment_id", "start_ms", "end_ms"], segs)
        stats.update(video_count=len(video), video_bytes=vbytes, audio_count=len(audio), audio_bytes=seg_bytes)
    else:
        if ds.kind == "synthetic":
            frames = synth_frames(ds.n_frames, ds.n_scenes, seed=cfg.seed, frame_interval_ms=ds.frame_interval_ms)
            audio = synth_audio(ds.audio_seconds, ds.sample_rate, seed=cfg.seed)
        else:
            frames = read_frames(ds.frames_dir, ds.frame_interval_ms)
            audio = read_wav(ds.wav)
        params = FingerprintParams.for_width(cfg.fingerprint.video_bytes, seed=cfg.seed)
        fps = fingerprint_frames(frames, params)
        csvio.write_atomic(
            out / VIDEO_FILE, encode_javf(MODALITY_VIDEO, params.n_bytes, [fp.to_bytes() for fp in fps])
        )
        units, segments = audio_fingerprint(audio, audio_params(cfg))
        csvio.write_atomic(out / AUDIO_FILE, encode_javf(MODALITY_AUDIO, seg_bytes, [s.to_bytes() for s in segments]))
        csvio.write_csv(
            out / "audio_units.csv",
            ["key", "timestamp", "title_id"],
            [{"key": u.key, "timestamp": u.timestamp, "title_id": u.title_id} for u in units],
        )
        csvio.write_csv(
            out / "audio_segments.csv",
            ["segment_id", "start_ms", "end_ms"],
            [{"segment_id": s.segment_id, "start_ms": s.start_ms, "end_ms": s.end_ms} for s in segments],
        )
        stats.update(
            video_count=len(fps),
            video_bytes=params.n_bytes,
            audio_units=len(units),
            audio_count=len(segments),
            audio_bytes=seg_bytes,
        )
    if "video_count" in stats:
        stats["video_payload"] = stats["video_count"] * stats["video_bytes"]
        stats["audio_payload"] = stats["audio_count"] * stats["audio_bytes"]
    csvio.write_atomic(out / "fingerprint_stats.json", json.dumps(stats, indent=2, sort_keys=True) + "\n")
    return stats


def load_corpus(cfg: ExperimentConfig):
    """Returns (video records, audio records, audio meta) from the fingerprint step."""
    out = Path(cfg.out)
    mv, wv, video = read_javf(out / VIDEO_FILE)
    ma, wa, audio = read_javf(out / AUDIO_FILE)
    if (mv, ma) != (MODALITY_VIDEO, MODALITY_AUDIO):
        raise ConfigError("fingerprint files hold the wrong modalities")
    meta = [(int(r["start_ms"]), 0) for r in csvio.read_csv(out / "audio_segments.csv")]
    return video, audio, meta


def point_sets(cfg: ExperimentConfig):
    video, audio, _ = load_corpus(cfg)
    return PointSet.from_bits(video, "video"), PointSet.from_keys(records_to_keys(audio), "audio")


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------


def _curve_name(modality: str, t: int) -> str:
    tag = "V" if modality == "video" else "A"
    return f"f_{tag}.csv" if t == 0 else f"f_{tag}_t{t}.csv"


def cmd_curves(cfg: ExperimentConfig) -> dict:
    out = _out(cfg)
    cov = cfg.coverage
    meta: dict = {"thresholds": [], "K": cov.K, "mode": cov.mode}
    if cfg.dataset.kind == "curves":
        ds = cfg.dataset
        cv = CoverageCurve(np.array(ds.curve_video, dtype=np.int64), 0)
        ca = CoverageCurve(np.array(ds.curve_audio, dtype=np.int64), 0)
        meta["n_video"] = ds.n_video if ds.n_video is not None else int(cv.f[-1])
        meta["n_audio"] = ds.n_audio if ds.n_audio is not None else int(ca.f[-1])
        thresholds = [(cov.r_video[0], cov.r_audio[0])]
        curves = [(cv, ca)]
    else:
        pv, pa = point_sets(cfg)
        meta["n_video"], meta["n_audio"] = pv.n, pa.n
        thresholds = list(zip(cov.r_video, cov.r_audio))
        curves = [
            (coverage_curve(pv, rv, cov.K, mode=cov.mode), coverage_curve(pa, ra, cov.K, mode=cov.mode))
            for rv, ra in thresholds
        ]
    for t, ((rv, ra), (cv, ca)) in enumerate(zip(thresholds, curves)):
        if cfg.dataset.kind != "curves":
            cv.check()
            ca.check()
        csvio.write_atomic(out / _curve_name("video", t), curve_to_csv(cv))
        csvio.write_atomic(out / _curve_name("audio", t), curve_to_csv(ca))
        meta["thresholds"].append({"r_video": rv, "r_audio": ra})
    csvio.write_atomic(out / CURVE_META, json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return meta


def load_curves(cfg: ExperimentConfig, t: int = 0) -> tuple[CurvePair, dict]:
    out = Path(cfg.out)
    meta = json.loads((out / CURVE_META).read_text())
    cv = curve_from_csv((out / _curve_name("video", t)).read_text())
    ca = curve_from_csv((out / _curve_name("audio", t)).read_text())
    return CurvePair.from_arrays(cv.f, ca.f, meta["n_video"], meta["n_audio"]), meta


def rate_model(cfg: ExperimentConfig) -> RateModel:
    al = cfg.allocate
    if al.cost_video is not None and al.cost_audio is not None:
        return RateModel(al.cost_video, al.cost_audio, 0)
    stats = json.loads((Path(cfg.out) / "fingerprint_stats.json").read_text())
    return RateModel(al.cost_video or stats["video_bytes"], al.cost_audio or stats["audio_bytes"], 0)


def budget_grid(cfg: ExperimentConfig, curves: CurvePair, rm: RateModel) -> list[int]:
    if cfg.allocate.budgets:
        return [int(b) for b in cfg.allocate.budgets]
    total = rm.total_bytes(curves)
    grid = np.rint(np.linspace(0, total, cfg.allocate.budget_points)).astype(np.int64)
    return [int(b) for b in grid]


# ---------------------------------------------------------------------------
# allocate / sweep
# ---------------------------------------------------------------------------


def _series(method, curves, rm, alpha, budgets, cfg):
    al = cfg.allocate
    if method == "greedy" and (not al.greedy_per_byte or al.greedy_lambda):
        return [
            greedy_allocate(curves, rm.with_budget(b), alpha, al.greedy_lambda, al.greedy_per_byte) for b in budgets
        ]
    return rate_coverage_series(method, curves, rm, alpha, budgets)


def run_methods(cfg, curves, rm, alpha, budgets, threshold="") -> tuple[dict, list[dict]]:
    results, rows = {}, []
    for method in cfg.allocate.methods:
        results[method] = _series(method, curves, rm, alpha, budgets, cfg)
        rows += series_rows(results[method], alpha, threshold)
    return results, rows


def _threshold_tag(meta, t) -> str:
    th = meta["thresholds"][t]
    return f"{th['r_video']}/{th['r_audio']}"


def _write_series(path, rows):
    dp_rows = [r for r in rows if r["method"] == "dp"]
    csvio.validate_rows(SERIES_COLUMNS, dp_rows, monotone=["coverage"], group_by="threshold")
    csvio.write_csv(path, SERIES_COLUMNS, rows)


def cmd_allocate(cfg: ExperimentConfig) -> dict:
    out = _out(cfg)
    curves, meta = load_curves(cfg)
    rm = rate_model(cfg)
    budgets = budget_grid(cfg, curves, rm)
    alpha = cfg.allocate.alpha[0]
    results, rows = run_methods(cfg, curves, rm, alpha, budgets, _threshold_tag(meta, 0))
    _write_series(out / "rate_coverage.csv", rows)
    for method, series in results.items():
        _write_series(out / f"rate_coverage_{method}.csv", [r for r in rows if r["method"] == method])
        if cfg.allocate.trace and method in ("greedy", "dp"):
            for r in series:
                csvio.write_atomic(out / "traces" / f"{method}_b{r.budget}.txt", "".join(c + "\n" for c in r.trace))
    lam_rows = []
    for b in budgets:
        evals: list = []
        res = lagrangian_allocate(curves, rm.with_budget(b), alpha, log=evals)
        lam_rows.append({"budget_bytes": b, "lambda": _fmt(res.lam), "rate": res.rate, "evaluations": len(evals)})
    csvio.write_csv(out / "lambda_log.csv", ["budget_bytes", "lambda", "rate", "evaluations"], lam_rows)
    return results


def cmd_sweep(cfg: ExperimentConfig) -> dict:
    """alpha sweep at the first threshold pair; threshold sweep at the first alpha (dp only)."""
    out = _out(cfg)
    curves, meta = load_curves(cfg)
    rm = rate_model(cfg)
    budgets = budget_grid(cfg, curves, rm)
    alpha_rows, done = [], {"alpha": {}, "threshold": {}}
    for a in cfg.allocate.alpha:
        series = rate_coverage_series("dp", curves, rm, a, budgets)
        done["alpha"][a] = series
        alpha_rows += series_rows(series, a, _threshold_tag(meta, 0))
    csvio.write_csv(out / "sweep_alpha.csv", SERIES_COLUMNS, alpha_rows, monotone=["coverage"], group_by="alpha")
    th_rows = []
    a0 = cfg.allocate.alpha[0]
    for t in range(len(meta["thresholds"])):
        ct, _ = load_curves(cfg, t)
        series = rate_coverage_series("dp", ct, rm, a0, budgets)
        done["threshold"][t] = series
        th_rows += series_rows(series, a0, _threshold_tag(meta, t))
    csvio.write_csv(out / "sweep_threshold.csv", SERIES_COLUMNS, th_rows, monotone=["coverage"], group_by="threshold")
    return done


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


def rate_at_coverage(budgets, coverages, level) -> float | None:
    """First crossing of ``level`` on the (rate, coverage) polyline."""
    for k, c in enumerate(coverages):
        if c >= level:
            if k == 0:
                return float(budgets[0])
            c0, b0, b1 = coverages[k - 1], budgets[k - 1], budgets[k]
            return float(b0 + (level - c0) / (c - c0) * (b1 - b0))
    return None


SUMMARY_COLUMNS = ["level", "method", "rate_method", "rate_dp", "saving"]


def summary_table(results: dict, levels) -> list[dict]:
    dp = results["dp"]
    budgets = [r.budget for r in dp]
    rows = []
    for level in levels:
        r_dp = rate_at_coverage(budgets, [r.coverage for r in dp], level)
        for method, series in results.items():
            r_ref = rate_at_coverage([r.budget for r in series], [r.coverage for r in series], level)
            if r_ref is None or r_dp is None:
                saving = "unreachable"
            else:
                saving = _fmt((r_ref - r_dp) / r_ref) if r_ref > 0 else _fmt(0.0)
            rows.append(
                {
                    "level": _fmt(level),
                    "method": method,
                    "rate_method": "unreachable" if r_ref is None else _fmt(r_ref),
                    "rate_dp": "unreachable" if r_dp is None else _fmt(r_dp),
                    "saving": saving,
                }
            )
    return rows


EVAL_COLUMNS = [
    "budget_bytes",
    "method",
    "n_video",
    "n_audio",
    "coverage",
    "accuracy_nearest",
    "accuracy_probe_all",
    "coverage_video",
    "coverage_audio",
    "accuracy_video_nearest",
    "accuracy_audio_nearest",
    "accuracy_video_probe_all",
    "accuracy_audio_probe_all",
]


def _fused(alpha, v, a):
    return alpha * v + (1.0 - alpha) * a


def cmd_evaluate(cfg: ExperimentConfig) -> dict:
    if cfg.dataset.kind == "curves":
        raise ConfigError("evaluate needs fingerprints; dataset.kind = 'curves' has none")
    out = _out(cfg)
    curves, meta = load_curves(cfg)
    rm = rate_model(cfg)
    budgets = budget_grid(cfg, curves, rm)
    alpha = cfg.allocate.alpha[0]
    cov = cfg.coverage
    video, audio, audio_meta = load_corpus(cfg)
    pv = PointSet.from_bits(video, "video")
    pa = PointSet.from_keys(records_to_keys(audio), "audio")
    rv, ra = cov.r_video[0], cov.r_audio[0]
    reps_v = rkcp3(pv, pv.n, rv, cov.K, cov.mode)
    reps_a = rkcp3(pa, pa.n, ra, cov.K, cov.mode)
    scale = 3 if cov.mode == "approx" else 1
    akeys = records_to_keys(audio)

    method = cfg.evaluate.method
    series = _series(method, curves, rm, alpha, budgets, cfg)
    rows = []
    mid = len(budgets) // 2
    for k, res in enumerate(series):
        db = build_database(
            res,
            representatives_for(reps_v, res.n_video),
            representatives_for(reps_a, res.n_audio),
            video,
            audio,
            rm,
            cov.K,
            scale * rv,
            scale * ra,
            audio_meta,
        )
        row = {
            "budget_bytes": res.budget,
            "method": method,
            "n_video": res.n_video,
            "n_audio": res.n_audio,
            "coverage": _fmt(res.coverage),
            "coverage_video": _fmt(db.coverage("video")),
            "coverage_audio": _fmt(db.coverage("audio")),
        }
        logs = []
        for mode in ("nearest", "probe_all"):
            acc = {}
            for modality, corpus, n in (("video", video, pv.n), ("audio", akeys, pa.n)):
                if (db.n_video if modality == "video" else db.n_audio) == 0:
                    acc[modality] = 0.0
                    continue
                rep = evaluate_accuracy(db, modality, corpus, range(n), mode)
                acc[modality] = rep.expected_accuracy
                if mode == "nearest":
                    logs += rep.log
            row[f"accuracy_{mode}"] = _fmt(_fused(alpha, acc["video"], acc["audio"]))
            row[f"accuracy_video_{mode}"] = _fmt(acc["video"])
            row[f"accuracy_audio_{mode}"] = _fmt(acc["audio"])
        rows.append({c: row[c] for c in EVAL_COLUMNS})
        if k == mid:
            csvio.write_atomic(out / "database.javd", encode_database(db))
            csvio.write_csv(out / "query_log.csv", LOG_COLUMNS, logs)
    csvio.write_csv(out / "coverage_accuracy.csv", EVAL_COLUMNS, rows, monotone=["coverage"] if method == "dp" else ())
    all_results = {m: _series(m, curves, rm, alpha, budgets, cfg) for m in cfg.allocate.methods}
    all_results.setdefault("dp", rate_coverage_series("dp", curves, rm, alpha, budgets))
    summary = summary_table(all_results, cfg.evaluate.levels)
    csvio.write_csv(out / "summary_table.csv", SUMMARY_COLUMNS, summary)
    return {"rows": rows, "summary": summary}


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def _md_table(rows, columns) -> list[str]:
    lines = ["| " + " | ".join(columns) + " |", "|" + "---|" * len(columns)]
    for r in rows:
        lines.append("| " + " | ".join(str(r[c]) for c in columns) + " |")
    return lines


def cmd_report(cfg: ExperimentConfig) -> str:
    out = Path(cfg.out)
    lines = ["# Rate-coverage run", "", "```json", cfg.to_json(), "```", ""]
    stats = out / "fingerprint_stats.json"
    if stats.exists():
        lines += ["## Fingerprints", "", "```json", stats.read_text().strip(), "```", ""]
    rc = out / "rate_coverage.csv"
    if rc.exists():
        rows = csvio.read_csv(rc)
        methods = sorted({r["method"] for r in rows})
        budgets = sorted({int(r["budget_bytes"]) for r in rows})
        picks = budgets[:: max(1, len(budgets) // 8)]
        table = []
        for b in picks:
            row = {"budget_bytes": b}
            for m in methods:
                hit = [r for r in rows if r["method"] == m and int(r["budget_bytes"]) == b]
                row[m] = f"{float(hit[0]['coverage']):.4f}" if hit else ""
            table.append(row)
        lines += ["## Coverage by budget", ""] + _md_table(table, ["budget_bytes"] + methods) + [""]
    st = out / "summary_table.csv"
    if st.exists():
        lines += ["## Bit-rate saving of dp at fixed coverage", ""] + _md_table(csvio.read_csv(st), SUMMARY_COLUMNS) + [""]
    ca = out / "coverage_accuracy.csv"
    if ca.exists():
        cols = ["budget_bytes", "coverage", "accuracy_nearest", "accuracy_probe_all"]
        lines += ["## Coverage vs accuracy", ""] + _md_table(csvio.read_csv(ca), cols) + [""]
    text = "\n".join(lines) + "\n"
    csvio.write_atomic(out / "report.md", text)
    return text


def run_all(cfg: ExperimentConfig) -> None:
    cmd_fingerprint(cfg)
    cmd_curves(cfg)
    cmd_allocate(cfg)
    cmd_sweep(cfg)
    if cfg.dataset.kind != "curves":
        cmd_evaluate(cfg)
    cmd_report(cfg)
