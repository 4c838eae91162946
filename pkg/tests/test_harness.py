import hashlib
from pathlib import Path

import numpy as np
import pytest

from javrc import harness
from javrc.cli import EXIT_IO, EXIT_OK, EXIT_VALIDATION, main
from javrc.config import config_from_dict, load_config
from javrc.csvio import SchemaError, read_csv, validate_rows, write_csv
from javrc.errors import ConfigError
from javrc.fingerprint import JAVF_HEADER_SIZE, read_javf
from javrc.ingest import synth_frames, write_pgm, write_wav
from javrc.retrieval import decode_database, encode_database

ROOT = Path(__file__).resolve().parents[1]


def _cfg(tmp_path, **sections):
    raw = {"out": str(tmp_path / "out"), "seed": 5}
    raw.update(sections)
    return config_from_dict(raw)


def _small(tmp_path, **extra):
    sections = {
        "dataset": {"n_frames": 40, "n_scenes": 4, "audio_seconds": 12.0},
        "allocate": {"budget_points": 8},
    }
    sections.update(extra)
    return _cfg(tmp_path, **sections)


def _points(tmp_path, vspread, aspread, **extra):
    sections = {
        "dataset": {
            "kind": "points",
            "video": {"n_points": 90, "n_clusters": 9, "spread": vspread},
            "audio": {"n_points": 60, "n_clusters": 6, "spread": aspread},
        },
        "coverage": {"r_video": [10, 30, 60], "r_audio": [0.125, 0.25, 0.5], "K": 16},
        "allocate": {"budget_points": 20, "alpha": [0.5, 0.0, 1.0]},
    }
    sections.update(extra)
    return _cfg(tmp_path, **sections)


def _digest(out):
    return {p.relative_to(out).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(out.rglob("*")) if p.is_file()}


def test_canonical_configs_load():
    assert load_config(ROOT / "configs" / "example.toml").dataset.kind == "synthetic"
    assert load_config(ROOT / "configs" / "knapsack.toml").allocate.cost_video == 99


def test_cli_runs_knapsack(tmp_path):
    assert main(["all", "--config", str(ROOT / "configs" / "knapsack.toml"), "--out", str(tmp_path)]) == EXIT_OK
    rows = [r for r in read_csv(tmp_path / "rate_coverage.csv") if r["budget_bytes"] == "198"]
    assert {r["method"]: float(r["coverage"]) for r in rows} == {"greedy": 15.0, "dp": 20.0, "brute_force": 20.0}


def test_cli_validation_errors(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[coverage]\nnot_a_key = 1\n")
    assert main(["curves", "--config", str(bad)]) == EXIT_VALIDATION
    bad.write_text("this is = = not toml")
    assert main(["curves", "--config", str(bad)]) == EXIT_VALIDATION
    bad.write_text("[allocate]\nalpha = [1.5]\n")
    assert main(["curves", "--config", str(bad)]) == EXIT_VALIDATION
    assert main(["fingerprint", "--config", str(ROOT / "configs" / "knapsack.toml"), "--seed", "-1", "--out", str(tmp_path)]) == EXIT_VALIDATION


def test_cli_io_errors(tmp_path):
    assert main(["curves", "--config", str(tmp_path / "missing.toml")]) == EXIT_IO
    cfg = tmp_path / "files.toml"
    cfg.write_text(f'out = "{tmp_path / "o"}"\n[dataset]\nkind = "files"\nframes_dir = "{tmp_path / "nope"}"\nwav = "{tmp_path / "nope.wav"}"\n')
    assert main(["fingerprint", "--config", str(cfg)]) == EXIT_IO
    # a later step without its inputs
    assert main(["allocate", "--out", str(tmp_path / "empty")]) == EXIT_IO


def test_reruns_are_byte_identical(tmp_path):
    cfg = _small(tmp_path)
    harness.run_all(cfg)
    first = _digest(tmp_path / "out")
    harness.run_all(cfg)
    assert _digest(tmp_path / "out") == first
    assert "database.javd" in first and "summary_table.csv" in first


def test_seed_changes_outputs(tmp_path):
    a, b = _small(tmp_path / "a"), _small(tmp_path / "b")
    b.seed = 6
    harness.cmd_fingerprint(a)
    harness.cmd_fingerprint(b)
    assert (tmp_path / "a/out/video.javf").read_bytes() != (tmp_path / "b/out/video.javf").read_bytes()


def test_fingerprint_payload(tmp_path):
    cfg = _cfg(tmp_path, dataset={"n_frames": 100, "n_scenes": 5, "audio_seconds": 5.0})
    stats = harness.cmd_fingerprint(cfg)
    assert stats["video_payload"] == 16000
    assert (tmp_path / "out/video.javf").stat().st_size == JAVF_HEADER_SIZE + 16000
    _, width, records = read_javf(tmp_path / "out/audio.javf")
    assert width == 32 and len(records) == stats["audio_count"]


def test_silent_audio_gives_empty_block(tmp_path):
    frames = tmp_path / "frames"
    frames.mkdir()
    for i, f in enumerate(synth_frames(12, 2, seed=1)):
        write_pgm(frames / f"{i:04d}.pgm", f.intensities)
    write_wav(tmp_path / "s.wav", np.zeros(16000, np.int16), 8000)
    cfg = _cfg(tmp_path, dataset={"kind": "files", "frames_dir": str(frames), "wav": str(tmp_path / "s.wav")}, allocate={"budget_points": 5})
    harness.run_all(cfg)
    assert (tmp_path / "out/audio.javf").stat().st_size == JAVF_HEADER_SIZE
    rows = read_csv(tmp_path / "out/coverage_accuracy.csv")
    assert all(r["coverage_audio"] == "0.0" for r in rows)
    assert float(rows[-1]["coverage_video"]) == 1.0


def test_curves_on_distinct_points(tmp_path):
    cfg = _points(tmp_path, 0, 0, coverage={"r_video": [0], "r_audio": [0.0], "K": 16})
    harness.cmd_fingerprint(cfg)
    harness.cmd_curves(cfg)
    f = [int(r["f"]) for r in read_csv(tmp_path / "out/f_V.csv")]
    # nine distinct points, ten copies each
    assert f[:10] == [0, 10, 20, 30, 40, 50, 60, 70, 80, 90]


def test_tight_clusters_dominate(tmp_path):
    series = {}
    for name, vs, as_ in (("tight", 4, 0), ("diffuse", 120, 4)):
        cfg = _points(tmp_path / name, vs, as_)
        harness.cmd_fingerprint(cfg)
        harness.cmd_curves(cfg)
        res = harness.cmd_allocate(cfg)
        series[name] = [r.coverage for r in res["dp"]]
    assert all(t >= d for t, d in zip(series["tight"], series["diffuse"]))
    assert series["tight"] != series["diffuse"]


def test_sweeps(tmp_path):
    cfg = _points(tmp_path, 30, 2)
    harness.cmd_fingerprint(cfg)
    harness.cmd_curves(cfg)
    done = harness.cmd_sweep(cfg)
    th = [[r.coverage for r in done["threshold"][t]] for t in range(3)]
    assert all(a <= b for lo, hi in zip(th, th[1:]) for a, b in zip(lo, hi))
    curves, _ = harness.load_curves(cfg)
    rm = harness.rate_model(cfg)
    for res in done["alpha"][1.0]:
        nv = min(curves.max_video, res.budget // rm.cost_video)
        assert res.coverage == curves.video[nv] / curves.n_video
    for res in done["alpha"][0.0]:
        na = min(curves.max_audio, res.budget // rm.cost_audio)
        assert res.coverage == curves.audio[na] / curves.n_audio
    assert {r["alpha"] for r in read_csv(tmp_path / "out/sweep_alpha.csv")} == {"0.5", "0.0", "1.0"}


def test_evaluate_accuracy_columns(tmp_path):
    cfg = _small(tmp_path)
    harness.run_all(cfg)
    for row in read_csv(tmp_path / "out/coverage_accuracy.csv"):
        for m in ("video", "audio"):
            assert row[f"accuracy_{m}_probe_all"] == row[f"coverage_{m}"]
            assert float(row[f"accuracy_{m}_nearest"]) <= float(row[f"coverage_{m}"])
    db = decode_database((tmp_path / "out/database.javd").read_bytes())
    assert encode_database(db) == (tmp_path / "out/database.javd").read_bytes()
    assert (tmp_path / "out/report.md").read_text().startswith("# Rate-coverage run")


def test_summary_savings(tmp_path):
    cfg = _small(tmp_path)
    harness.run_all(cfg)
    rows = read_csv(tmp_path / "out/summary_table.csv")
    assert all(r["saving"] == "0.0" for r in rows if r["method"] == "dp")
    assert all(float(r["saving"]) >= 0 for r in rows if r["saving"] != "unreachable")


def test_rate_at_coverage():
    assert harness.rate_at_coverage([0, 100, 200], [0.0, 0.5, 1.0], 0.75) == 150.0
    assert harness.rate_at_coverage([0, 100], [0.0, 0.5], 0.75) is None
    assert harness.rate_at_coverage([0, 100], [0.2, 0.5], 0.1) == 0.0


def test_evaluate_rejects_explicit_curves(tmp_path):
    cfg = load_config(ROOT / "configs" / "knapsack.toml")
    cfg.out = str(tmp_path)
    harness.cmd_curves(cfg)
    with pytest.raises(ConfigError):
        harness.cmd_evaluate(cfg)


def test_schema_validator(tmp_path):
    cols = ["budget_bytes", "coverage"]
    with pytest.raises(SchemaError):
        validate_rows(cols, [{"budget_bytes": 0, "coverage": 0.5}, {"budget_bytes": 1, "coverage": 0.4}], monotone=["coverage"])
    with pytest.raises(SchemaError):
        validate_rows(cols, [{"budget_bytes": 0, "coverage": float("nan")}], monotone=["coverage"])
    with pytest.raises(SchemaError):
        validate_rows(cols, [{"coverage": 0.5, "budget_bytes": 0}])
    with pytest.raises(SchemaError):
        write_csv(tmp_path / "x.csv", cols, [{"budget_bytes": 0}])
    assert list(tmp_path.iterdir()) == []
