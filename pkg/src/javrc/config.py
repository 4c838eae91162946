"""Experiment configuration (TOML) as plain dataclasses."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .ingest import SyntheticCloudSpec

DATASET_KINDS = ("synthetic", "files", "points", "curves")
ALL_METHODS = ("arbitrary", "audio_first", "greedy", "dp", "lagrangian")


@dataclass
class DatasetConfig:
    kind: str = "synthetic"
    # synthetic media
    n_frames: int = 200
    n_scenes: int = 12
    audio_seconds: float = 60.0
    sample_rate: int = 8000
    frame_interval_ms: int = 40
    # files
    frames_dir: str = ""
    wav: str = ""
    # points
    video: dict = field(default_factory=dict)
    audio: dict = field(default_factory=dict)
    # explicit curves
    curve_video: list = field(default_factory=list)
    curve_audio: list = field(default_factory=list)
    n_video: float | None = None
    n_audio: float | None = None


@dataclass
class FingerprintConfig:
    video_bytes: int = 160
    window: int = 1024
    hop: int = 512
    nms_time: int = 3
    nms_freq: int = 5
    floor: float = 1.0e4
    fanout: int = 3
    dt_min: int = 1
    dt_max: int = 64
    units_per_segment: int = 8


@dataclass
class CoverageConfig:
    r_video: list = field(default_factory=lambda: [100])
    r_audio: list = field(default_factory=lambda: [0.5])
    K: int = 16
    mode: str = "strict"


@dataclass
class AllocateConfig:
    alpha: list = field(default_factory=lambda: [0.5])
    methods: list = field(default_factory=lambda: list(ALL_METHODS))
    budget_points: int = 40
    budgets: list = field(default_factory=list)
    cost_video: int | None = None
    cost_audio: int | None = None
    greedy_per_byte: bool = True
    greedy_lambda: float = 0.0
    trace: bool = True


@dataclass
class EvaluateConfig:
    levels: list = field(default_factory=lambda: [0.70, 0.75, 0.80, 0.85, 0.90, 0.95])
    modes: list = field(default_factory=lambda: ["nearest", "probe_all"])
    method: str = "dp"


@dataclass
class ExperimentConfig:
    seed: int = 0
    out: str = "out"
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    fingerprint: FingerprintConfig = field(default_factory=FingerprintConfig)
    coverage: CoverageConfig = field(default_factory=CoverageConfig)
    allocate: AllocateConfig = field(default_factory=AllocateConfig)
    evaluate: EvaluateConfig = field(default_factory=EvaluateConfig)

    def validate(self) -> "ExperimentConfig":
        ds = self.dataset
        if ds.kind not in DATASET_KINDS:
            raise ConfigError(f"dataset.kind must be one of {DATASET_KINDS}")
        if ds.kind == "files" and not (ds.frames_dir and ds.wav):
            raise ConfigError("dataset.kind = 'files' needs frames_dir and wav")
        if ds.kind == "points":
            try:
                self.video_cloud()
                self.audio_cloud()
            except TypeError as exc:
                raise ConfigError(f"bad point cloud spec: {exc}") from exc
        if ds.kind == "curves":
            if not ds.curve_video or not ds.curve_audio:
                raise ConfigError("dataset.kind = 'curves' needs curve_video and curve_audio")
            if self.allocate.cost_video is None or self.allocate.cost_audio is None:
                raise ConfigError("explicit curves need allocate.cost_video and allocate.cost_audio")
        cov = self.coverage
        for name in ("r_video", "r_audio"):
            v = getattr(cov, name)
            setattr(cov, name, list(v) if isinstance(v, (list, tuple)) else [v])
        if len(cov.r_video) != len(cov.r_audio) or not cov.r_video:
            raise ConfigError("r_video and r_audio must be equally long, non-empty threshold lists")
        if any(r < 0 for r in cov.r_video + cov.r_audio):
            raise ConfigError("thresholds must be non-negative")
        if cov.K < 1:
            raise ConfigError("K must be >= 1")
        if cov.mode not in ("strict", "approx"):
            raise ConfigError("coverage.mode must be 'strict' or 'approx'")
        al = self.allocate
        if not isinstance(al.alpha, (list, tuple)):
            al.alpha = [al.alpha]
        if not al.alpha or any(not 0 <= a <= 1 for a in al.alpha):
            raise ConfigError("alpha values must lie in [0, 1]")
        unknown = set(al.methods) - set(ALL_METHODS) - {"brute_force"}
        if unknown:
            raise ConfigError(f"unknown methods {sorted(unknown)}")
        if al.budget_points < 2 and not al.budgets:
            raise ConfigError("budget_points must be >= 2")
        if sorted(al.budgets) != list(al.budgets):
            raise ConfigError("budgets must be ascending")
        for m in self.evaluate.modes:
            if m not in ("nearest", "probe_all"):
                raise ConfigError(f"unknown retrieval mode {m}")
        return self

    def video_cloud(self) -> SyntheticCloudSpec:
        spec = {"kind": "bits", "seed": self.seed, **self.dataset.video}
        return SyntheticCloudSpec(**spec)

    def audio_cloud(self) -> SyntheticCloudSpec:
        spec = {"kind": "keys", "dimension": self.fingerprint.units_per_segment, "seed": self.seed + 1, **self.dataset.audio}
        return SyntheticCloudSpec(**spec)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


_SECTIONS = {
    "dataset": DatasetConfig,
    "fingerprint": FingerprintConfig,
    "coverage": CoverageConfig,
    "allocate": AllocateConfig,
    "evaluate": EvaluateConfig,
}


def config_from_dict(raw: dict) -> ExperimentConfig:
    kwargs = {}
    for key, value in raw.items():
        if key in _SECTIONS:
            cls = _SECTIONS[key]
            names = {f.name for f in dataclasses.fields(cls)}
            bad = set(value) - names
            if bad:
                raise ConfigError(f"unknown keys in [{key}]: {sorted(bad)}")
            kwargs[key] = cls(**value)
        elif key in ("seed", "out"):
            kwargs[key] = value
        else:
            raise ConfigError(f"unknown top-level key {key!r}")
    return ExperimentConfig(**kwargs).validate()


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(raw)
