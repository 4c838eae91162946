"""Media loading (PCM-16 WAV, binary PGM frames) and synthetic corpora."""

from __future__ import annotations

import os
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, EmptyInput, ParseError, UnsupportedFormat

DEFAULT_FRAME_INTERVAL_MS = 40


@dataclass(frozen=True)
class PcmAudio:
    samples: np.ndarray  # int16, mono
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def duration_ms(self) -> float:
        return 1000.0 * len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class Frame:
    intensities: np.ndarray  # (height, width) uint8
    timestamp: int = 0  # ms

    @property
    def width(self) -> int:
        return self.intensities.shape[1]

    @property
    def height(self) -> int:
        return self.intensities.shape[0]


@dataclass(frozen=True)
class FrameSequence:
    frames: list[Frame]

    def __post_init__(self):
        ts = [f.timestamp for f in self.frames]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("frame timestamps must be strictly increasing")

    def __len__(self):
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)


def _mono_mean(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    # integer mean with round-half-away-from-zero
    s = left.astype(np.int32) + right.astype(np.int32)
    mono = np.sign(s) * ((np.abs(s) + 1) // 2)
    return mono.astype(np.int16)


def read_wav(path) -> PcmAudio:
    """Load a PCM 16-bit WAV file, averaging stereo down to mono."""
    try:
        with wave.open(os.fspath(path), "rb") as w:
            channels = w.getnchannels()
            width = w.getsampwidth()
            rate = w.getframerate()
            raw = w.readframes(w.getnframes())
    except wave.Error as exc:
        if str(exc).startswith("unknown format"):
            raise UnsupportedFormat(f"{path}: {exc}") from exc
        raise ParseError(f"{path}: {exc}") from exc
    except EOFError as exc:
        raise ParseError(f"{path}: truncated header") from exc
    if width != 2:
        raise UnsupportedFormat(f"{path}: {8 * width}-bit samples, expected 16-bit")
    if channels not in (1, 2):
        raise UnsupportedFormat(f"{path}: {channels} channels")
    data = np.frombuffer(raw, dtype="<i2")
    if len(data) % channels:
        raise ParseError(f"{path}: partial sample frame")
    if channels == 2:
        data = _mono_mean(data[0::2], data[1::2])
    if len(data) == 0:
        raise EmptyInput(f"{path}: no samples")
    return PcmAudio(samples=data.astype(np.int16), sample_rate=rate)


def write_wav(path, samples, sample_rate: int) -> None:
    """Write int16 samples; a 2-D array of shape (n, 2) is written as stereo."""
    samples = np.asarray(samples, dtype="<i2")
    channels = 1 if samples.ndim == 1 else samples.shape[1]
    with wave.open(os.fspath(path), "wb") as w:
        w.setnchannels(channels)
        w.setsampwidth(2)
        w.setframerate(sample_rate)
        w.writeframes(samples.tobytes())


def _pgm_tokens(data: bytes, count: int):
    tokens = []
    pos = 0
    while len(tokens) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError("truncated PGM header")
        tokens.append(data[start:pos])
    return tokens, pos


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise UnsupportedFormat(f"{path}: not a binary PGM (P5) file")
    try:
        (w, h, maxval), pos = _pgm_tokens(data[2:], 3)
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise ParseError(f"{path}: bad PGM header") from exc
    if maxval != 255:
        raise UnsupportedFormat(f"{path}: maxval {maxval}, expected 255")
    if w <= 0 or h <= 0:
        raise ParseError(f"{path}: empty image")
    pos += 2 + 1  # skip magic and the single whitespace after maxval
    pixels = data[pos : pos + w * h]
    if len(pixels) != w * h:
        raise ParseError(f"{path}: expected {w * h} pixel bytes, got {len(pixels)}")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(h, w).copy()


def write_pgm(path, image) -> None:
    image = np.asarray(image, dtype=np.uint8)
    h, w = image.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + image.tobytes())


def read_frames(directory, frame_interval_ms: int = DEFAULT_FRAME_INTERVAL_MS) -> FrameSequence:
    """Load every file in ``directory`` (sorted by name) as a P5 frame."""
    paths = sorted(p for p in Path(directory).iterdir() if p.is_file() and not p.name.startswith("."))
    if not paths:
        raise EmptyInput(f"{directory}: no frames")
    frames = [Frame(read_pgm(p), timestamp=i * frame_interval_ms) for i, p in enumerate(paths)]
    return FrameSequence(frames)


# ---------------------------------------------------------------------------
# synthetic corpora
# ---------------------------------------------------------------------------

POINT_KINDS = ("bits", "vector", "keys")


@dataclass(frozen=True)
class SyntheticCloudSpec:
    """Clustered point cloud.

    ``kind`` selects the space: ``bits`` gives packed binary strings of
    ``dimension`` bits (Hamming), ``vector`` integer vectors of length
    ``dimension`` (Chebyshev distance), ``keys`` hash-key bundles of
    ``dimension`` keys each (segment distance).  Every point lies within
    ``spread`` units of its cluster center: bit flips, per-coordinate offset
    or replaced keys, respectively.
    """

    n_points: int
    n_clusters: int = 1
    spread: int = 0
    dimension: int = 1280
    kind: str = "bits"
    seed: int = 0

    def __post_init__(self):
        if self.n_points < 1:
            raise ConfigError("n_points must be >= 1")
        if not 1 <= self.n_clusters <= self.n_points:
            raise ConfigError("n_clusters must lie in [1, n_points]")
        if self.spread < 0:
            raise ConfigError("spread must be >= 0")
        if self.kind not in POINT_KINDS:
            raise ConfigError(f"kind must be one of {POINT_KINDS}")
        if self.kind == "bits" and (self.dimension % 8 or self.spread > self.dimension):
            raise ConfigError("bit width must be a multiple of 8 and >= spread")
        if self.kind == "keys" and self.spread > self.dimension:
            raise ConfigError("cannot replace more keys than a segment holds")


@dataclass
class LabeledPoints:
    points: np.ndarray
    labels: np.ndarray  # cluster id per point
    kind: str
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.points)


def _distinct_rows(rng, n, draw):
    rows, seen = [], set()
    while len(rows) < n:
        row = draw()
        key = row.tobytes()
        if key not in seen:
            seen.add(key)
            rows.append(row)
    return np.stack(rows)


def synth_points(spec: SyntheticCloudSpec) -> LabeledPoints:
    """Deterministic clustered cloud; points are laid out cluster by cluster."""
    rng = np.random.default_rng(spec.seed)
    n, c, d = spec.n_points, spec.n_clusters, spec.dimension
    labels = (np.arange(n) * c) // n

    if spec.kind == "bits":
        centers = _distinct_rows(rng, c, lambda: rng.integers(0, 2, d, dtype=np.uint8))
        pts = centers[labels].copy()
        for i in range(n):
            m = int(rng.integers(0, spec.spread + 1))
            if m:
                pos = rng.choice(d, size=m, replace=False)
                pts[i, pos] ^= 1
        return LabeledPoints(np.packbits(pts, axis=1), labels, "bits")

    if spec.kind == "vector":
        centers = _distinct_rows(rng, c, lambda: rng.integers(0, 1000 * max(1, spec.spread), d))
        offsets = rng.integers(-spec.spread, spec.spread + 1, size=(n, d))
        return LabeledPoints(centers[labels] + offsets, labels, "vector")

    centers = _distinct_rows(rng, c, lambda: np.sort(rng.integers(0, 2**32, d, dtype=np.uint64)))
    pts = centers[labels].copy()
    for i in range(n):
        m = int(rng.integers(0, spec.spread + 1))
        if m:
            pos = rng.choice(d, size=m, replace=False)
            pts[i, pos] = rng.integers(0, 2**32, m, dtype=np.uint64)
    return LabeledPoints(pts.astype(np.uint32), labels, "keys")


def synth_frames(
    n_frames: int,
    n_scenes: int,
    seed: int = 0,
    width: int = 64,
    height: int = 48,
    jitter: float = 2.0,
    frame_interval_ms: int = DEFAULT_FRAME_INTERVAL_MS,
) -> FrameSequence:
    """Shot-structured grayscale clip: each scene is a smooth random image
    that drifts slowly and picks up sensor noise frame to frame."""
    rng = np.random.default_rng(seed)
    scene_of = (np.arange(n_frames) * n_scenes) // n_frames
    yy, xx = np.mgrid[0:height, 0:width]
    scenes = []
    for _ in range(n_scenes):
        coarse = rng.uniform(0, 255, size=(4, 4))
        ys = np.linspace(0, 3, height)
        xs = np.linspace(0, 3, width)
        y0 = np.clip(np.floor(ys).astype(int), 0, 2)
        x0 = np.clip(np.floor(xs).astype(int), 0, 2)
        fy = (ys - y0)[:, None]
        fx = (xs - x0)[None, :]
        img = (
            coarse[y0][:, x0] * (1 - fy) * (1 - fx)
            + coarse[y0 + 1][:, x0] * fy * (1 - fx)
            + coarse[y0][:, x0 + 1] * (1 - fy) * fx
            + coarse[y0 + 1][:, x0 + 1] * fy * fx
        )
        img = img + 30 * np.sin(xx / rng.uniform(3, 9) + rng.uniform(0, 6.28))
        scenes.append(img)
    frames = []
    for i in range(n_frames):
        shift = i % 7 - 3
        img = np.roll(scenes[scene_of[i]], shift, axis=1)
        img = img + rng.normal(0, jitter, size=img.shape)
        frames.append(Frame(np.clip(np.rint(img), 0, 255).astype(np.uint8), timestamp=i * frame_interval_ms))
    return FrameSequence(frames)


def synth_audio(
    seconds: float,
    sample_rate: int = 8000,
    seed: int = 0,
    n_motifs: int = 6,
    note_samples: int = 2048,
    noise: float = 50.0,
) -> PcmAudio:
    """Melody assembled from a few recurring four-note motifs, so segments
    repeat.  Keep ``note_samples`` a multiple of the STFT hop for repeats to
    land on identical analysis frames."""
    rng = np.random.default_rng(seed)
    motifs = [rng.uniform(200, 0.45 * sample_rate, size=(4, 2)) for _ in range(n_motifs)]
    total = int(seconds * sample_rate)
    out = np.zeros(total)
    t = np.arange(note_samples) / sample_rate
    env = np.hanning(note_samples)
    pos = 0
    while pos < total:
        for freqs in motifs[int(rng.integers(0, n_motifs))]:
            if pos >= total:
                break
            tone = sum(np.sin(2 * np.pi * f * t) for f in freqs) * env * 6000
            end = min(total, pos + note_samples)
            out[pos:end] += tone[: end - pos]
            pos = end
    out += rng.normal(0, noise, size=total)
    return PcmAudio(np.clip(np.rint(out), -32768, 32767).astype(np.int16), sample_rate)
