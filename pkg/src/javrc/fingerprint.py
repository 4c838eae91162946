"""Video binary fingerprints, audio peak-pair hashes and their distances.

Video: each frame is rescaled to a small square, then described by
block-pair intensity comparisons followed by per-pixel threshold tests.
The sampling pattern depends only on the database seed, so every frame is
measured the same way and Hamming distance is meaningful.

Audio: Hann-windowed magnitude spectrogram, rectangular non-maximum
suppression, then anchor/target peak pairs packed into 32-bit keys
(10 bits per frequency bin, 12 bits of frame offset).  Consecutive runs of
``units_per_segment`` keys form fixed-size segments.
"""

from __future__ import annotations

import struct
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .errors import EmptyInput, IncompatibleFingerprints, ParseError, UnsupportedFormat
from .ingest import Frame, PcmAudio
from .rng import Xoshiro256

# ---------------------------------------------------------------------------
# video
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FingerprintParams:
    k_side: int = 32
    n_pairs: int = 1024
    m_pixels: int = 256
    block: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.k_side < 2 or self.k_side % self.block:
            raise ValueError("k_side must be >= 2 and a multiple of the block size")
        if self.n_bits % 8:
            raise ValueError("n_pairs + m_pixels must be a multiple of 8")
        if self.n_pairs > self.n_blocks * (self.n_blocks - 1) // 2:
            raise ValueError("more block pairs requested than exist")

    @property
    def n_bits(self) -> int:
        return self.n_pairs + self.m_pixels

    @property
    def n_bytes(self) -> int:
        return self.n_bits // 8

    @property
    def n_blocks(self) -> int:
        return (self.k_side // self.block) ** 2

    @classmethod
    def for_width(cls, n_bytes: int, seed: int = 0) -> "FingerprintParams":
        """160-byte and 200-byte presets: 256 pixel bits, the rest block pairs."""
        return cls(n_pairs=8 * n_bytes - 256, m_pixels=256, seed=seed)


class SamplingPattern(NamedTuple):
    pairs: np.ndarray  # (n_pairs, 2) block indices, first < second
    pixels: np.ndarray  # (m_pixels,) flat pixel index into the K x K image
    thresholds: np.ndarray  # (m_pixels,)


@lru_cache(maxsize=16)
def sampling_pattern(params: FingerprintParams) -> SamplingPattern:
    """Block pairs, then (pixel, threshold) draws, all from one seeded stream.

    Unordered pairs are enumerated lexicographically ((0,1), (0,2), ...) and
    drawn without replacement by partial Fisher-Yates.
    """
    rng = Xoshiro256(params.seed)
    nb = params.n_blocks
    all_pairs = [(a, b) for a in range(nb) for b in range(a + 1, nb)]
    picked = rng.sample_without_replacement(len(all_pairs), params.n_pairs)
    pairs = np.array([all_pairs[i] for i in picked], dtype=np.int64).reshape(-1, 2)
    pixels, thresholds = [], []
    for _ in range(params.m_pixels):
        pixels.append(rng.below(params.k_side**2))
        thresholds.append(rng.below(256))
    return SamplingPattern(pairs, np.array(pixels, dtype=np.int64), np.array(thresholds, dtype=np.float64))


def rescale_bilinear(image: np.ndarray, side: int) -> np.ndarray:
    """Bilinear resize to side x side using pixel-center alignment."""
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape

    def axis(n_in):
        src = (np.arange(side) + 0.5) * (n_in / side) - 0.5
        src = np.clip(src, 0, n_in - 1)
        lo = np.floor(src).astype(np.int64)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, src - lo

    y0, y1, fy = axis(h)
    x0, x1, fx = axis(w)
    fy = fy[:, None]
    fx = fx[None, :]
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bottom = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return top * (1 - fy) + bottom * fy


@dataclass(frozen=True)
class VideoFingerprint:
    bits: np.ndarray  # packed uint8, big-endian bit order within a byte
    frame_id: int = 0
    timestamp: int = 0

    @property
    def n_bits(self) -> int:
        return 8 * len(self.bits)

    def to_bytes(self) -> bytes:
        return self.bits.tobytes()

    def __eq__(self, other):
        if not isinstance(other, VideoFingerprint):
            return NotImplemented
        return (
            self.frame_id == other.frame_id
            and self.timestamp == other.timestamp
            and np.array_equal(self.bits, other.bits)
        )

    __hash__ = None


def video_fingerprint(frame: Frame, params: FingerprintParams, frame_id: int = 0) -> VideoFingerprint:
    if frame.intensities.size == 0:
        raise EmptyInput("empty frame")
    small = rescale_bilinear(frame.intensities, params.k_side)
    pat = sampling_pattern(params)
    nb_side = params.k_side // params.block
    b = params.block
    means = small.reshape(nb_side, b, nb_side, b).mean(axis=(1, 3)).ravel()
    pair_bits = means[pat.pairs[:, 0]] > means[pat.pairs[:, 1]]
    pixel_bits = small.ravel()[pat.pixels] > pat.thresholds
    bits = np.packbits(np.concatenate([pair_bits, pixel_bits]).astype(np.uint8))
    return VideoFingerprint(bits, frame_id=frame_id, timestamp=frame.timestamp)


def fingerprint_frames(frames, params: FingerprintParams) -> list[VideoFingerprint]:
    return [video_fingerprint(f, params, frame_id=i) for i, f in enumerate(frames)]


_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)


def hamming(a: VideoFingerprint, b: VideoFingerprint) -> int:
    if a.bits.shape != b.bits.shape:
        raise IncompatibleFingerprints(f"width {a.n_bits} vs {b.n_bits}")
    return int(_POPCOUNT[np.bitwise_xor(a.bits, b.bits)].sum())


def hamming_matrix(packed: np.ndarray) -> np.ndarray:
    """All-pairs Hamming distances for rows of a packed uint8 array."""
    packed = np.asarray(packed, dtype=np.uint8)
    n = len(packed)
    out = np.empty((n, n), dtype=np.int64)
    for i in range(n):
        out[i] = _POPCOUNT[np.bitwise_xor(packed, packed[i])].sum(axis=1)
    return out


# ---------------------------------------------------------------------------
# audio
# ---------------------------------------------------------------------------

F_BITS, DT_BITS = 10, 12


@dataclass(frozen=True)
class AudioParams:
    window: int = 1024
    hop: int = 512
    nms_time: int = 3
    nms_freq: int = 5
    floor: float = 1.0e4
    fanout: int = 3
    dt_min: int = 1  # exclusive
    dt_max: int = 64  # inclusive
    units_per_segment: int = 8

    def __post_init__(self):
        if self.window & (self.window - 1) or self.window < 2:
            raise ValueError("window must be a power of two")
        if not 0 < self.hop <= self.window:
            raise ValueError("hop must lie in (0, window]")
        if self.window // 2 > 1 << F_BITS:
            raise ValueError("frequency bins do not fit the key layout")
        if not 0 <= self.dt_min < self.dt_max < 1 << DT_BITS:
            raise ValueError("bad pairing window")
        if self.units_per_segment < 1:
            raise ValueError("units_per_segment must be >= 1")

    @property
    def segment_bytes(self) -> int:
        return 4 * self.units_per_segment


def pack_key(f1: int, f2: int, dt: int) -> int:
    if not (0 <= f1 < 1 << F_BITS and 0 <= f2 < 1 << F_BITS and 0 < dt < 1 << DT_BITS):
        raise ValueError(f"key fields out of range: {(f1, f2, dt)}")
    return (f1 << (F_BITS + DT_BITS)) | (f2 << DT_BITS) | dt


def unpack_key(key: int) -> tuple[int, int, int]:
    return key >> (F_BITS + DT_BITS), (key >> DT_BITS) & ((1 << F_BITS) - 1), key & ((1 << DT_BITS) - 1)


class AudioHashUnit(NamedTuple):
    key: int
    timestamp: int  # ms, anchor time
    title_id: int = 0


@dataclass(frozen=True)
class AudioSegment:
    keys: tuple[int, ...]
    segment_id: int = 0
    start_ms: int = 0
    end_ms: int = 0

    @property
    def n_units(self) -> int:
        return len(self.keys)

    def to_bytes(self) -> bytes:
        return struct.pack(f"<{len(self.keys)}I", *self.keys)


def hann(n: int) -> np.ndarray:
    # periodic Hann, the usual choice for STFT analysis
    return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)


def spectrogram(audio: PcmAudio, window: int = 1024, hop: int = 512) -> np.ndarray:
    """Magnitude STFT; ``grid[t, f]`` for bins f < window/2."""
    if window & (window - 1) or window < 2:
        raise ValueError("window must be a power of two")
    if not 0 < hop <= window:
        raise ValueError("hop must lie in (0, window]")
    x = np.asarray(audio.samples, dtype=np.float64)
    if len(x) < window:
        raise EmptyInput(f"{len(x)} samples is shorter than one {window}-sample window")
    frames = np.lib.stride_tricks.sliding_window_view(x, window)[::hop]
    spec = np.fft.rfft(frames * hann(window), axis=1)
    return np.abs(spec[:, : window // 2])


def peak_pick(grid: np.ndarray, radius: tuple[int, int] = (3, 5), floor: float = 0.0) -> list[tuple[int, int]]:
    """Local maxima over a (2*dt+1) x (2*df+1) rectangle.

    A cell survives when it reaches ``floor``, no neighbour exceeds it, at
    least one neighbour is strictly lower (plateaus yield nothing) and no
    lexicographically earlier neighbour ties with it.
    """
    g = np.asarray(grid, dtype=np.float64)
    if g.size == 0:
        return []
    dt, df = radius
    if dt == df == 0:
        return []  # no neighbours, so nothing can stand out
    size = (2 * dt + 1, 2 * df + 1)
    hi = ndimage.maximum_filter(g, size=size, mode="constant", cval=-np.inf)
    ring = np.ones(size, dtype=bool)
    ring[dt, df] = False
    lo = ndimage.minimum_filter(g, footprint=ring, mode="constant", cval=np.inf)
    cand = (g >= floor) & (g >= hi) & (g > lo)
    peaks = []
    T, F = g.shape
    for t, f in zip(*np.nonzero(cand)):
        v = g[t, f]
        # earlier neighbours: rows above within the window, plus same row to the left
        t0, f0, f1 = max(0, t - dt), max(0, f - df), min(F, f + df + 1)
        if t > t0 and np.any(g[t0:t, f0:f1] == v):
            continue
        if f > f0 and np.any(g[t, f0:f] == v):
            continue
        peaks.append((int(t), int(f)))
    return peaks


def pair_peaks(
    peaks,
    fanout: int = 3,
    target_window: tuple[int, int] = (1, 64),
    ms_per_frame: float = 1.0,
    title_id: int = 0,
) -> list[AudioHashUnit]:
    """Pair each anchor with up to ``fanout`` later peaks with
    ``target_window[0] < dt <= target_window[1]``."""
    lo, hi = target_window
    peaks = sorted(peaks)
    units = []
    for i, (t1, f1) in enumerate(peaks):
        taken = 0
        for t2, f2 in peaks[i + 1 :]:
            if taken == fanout:
                break
            d = t2 - t1
            if d > hi:
                break
            if d > lo:
                units.append(AudioHashUnit(pack_key(f1, f2, d), int(round(t1 * ms_per_frame)), title_id))
                taken += 1
    return units


def segment_audio(units, units_per_segment: int = 8) -> list[AudioSegment]:
    """Consecutive groups of exactly ``units_per_segment`` units; the tail is dropped."""
    if units_per_segment < 1:
        raise ValueError("units_per_segment must be >= 1")
    out = []
    for s in range(len(units) // units_per_segment):
        chunk = units[s * units_per_segment : (s + 1) * units_per_segment]
        out.append(
            AudioSegment(
                keys=tuple(u.key for u in chunk),
                segment_id=s,
                start_ms=chunk[0].timestamp,
                end_ms=chunk[-1].timestamp,
            )
        )
    return out


def audio_fingerprint(audio: PcmAudio, params: AudioParams = AudioParams(), title_id: int = 0):
    """Full audio chain; returns (hash units, segments)."""
    if len(audio.samples) < params.window:
        return [], []
    grid = spectrogram(audio, params.window, params.hop)
    peaks = peak_pick(grid, (params.nms_time, params.nms_freq), params.floor)
    units = pair_peaks(
        peaks,
        params.fanout,
        (params.dt_min, params.dt_max),
        ms_per_frame=1000.0 * params.hop / audio.sample_rate,
        title_id=title_id,
    )
    return units, segment_audio(units, params.units_per_segment)


def segment_distance(a: AudioSegment, b: AudioSegment) -> float:
    """1 - (multiset key overlap) / U."""
    if a.n_units != b.n_units:
        raise IncompatibleFingerprints(f"{a.n_units} vs {b.n_units} units")
    shared = sum((Counter(a.keys) & Counter(b.keys)).values())
    return 1.0 - shared / a.n_units


def segment_distance_matrix(keys: np.ndarray) -> np.ndarray:
    """All-pairs segment distance for rows of a (n, U) key array.

    Uses an inverted index so only segments sharing a key are compared.
    """
    keys = np.asarray(keys)
    n, u = keys.shape
    shared = np.zeros((n, n), dtype=np.int64)
    counts = [Counter(row.tolist()) for row in keys]
    index: dict[int, list[int]] = {}
    for i, c in enumerate(counts):
        for k in c:
            index.setdefault(k, []).append(i)
    for k, members in index.items():
        if len(members) == 1:
            i = members[0]
            shared[i, i] += counts[i][k]
            continue
        m = np.array(members)
        mult = np.array([counts[i][k] for i in members])
        shared[np.ix_(m, m)] += np.minimum.outer(mult, mult)
    return 1.0 - shared / u


# ---------------------------------------------------------------------------
# JAVF container
# ---------------------------------------------------------------------------

JAVF_MAGIC = b"JAVF"
JAVF_VERSION = 1
MODALITY_VIDEO, MODALITY_AUDIO = 0, 1
_JAVF_HEADER = struct.Struct("<4sHBHQ")
JAVF_HEADER_SIZE = _JAVF_HEADER.size  # 17 bytes


def encode_javf(modality: int, width: int, records) -> bytes:
    payload = b"".join(bytes(r) for r in records)
    count = len(payload) // width if width else 0
    if width <= 0 or len(payload) != count * width:
        raise ValueError("records must all be exactly `width` bytes")
    return _JAVF_HEADER.pack(JAVF_MAGIC, JAVF_VERSION, modality, width, count) + payload


def decode_javf(data: bytes, offset: int = 0):
    """Returns (modality, width, records array (count, width) uint8, bytes consumed)."""
    if len(data) - offset < JAVF_HEADER_SIZE:
        raise ParseError("truncated JAVF header")
    magic, version, modality, width, count = _JAVF_HEADER.unpack_from(data, offset)
    if magic != JAVF_MAGIC:
        raise ParseError("bad JAVF magic")
    if version != JAVF_VERSION:
        raise UnsupportedFormat(f"JAVF version {version}")
    start = offset + JAVF_HEADER_SIZE
    end = start + width * count
    if end > len(data):
        raise ParseError("truncated JAVF payload")
    records = np.frombuffer(data[start:end], dtype=np.uint8).reshape(count, width).copy()
    return modality, width, records, end - offset


def write_video_javf(path, fingerprints, n_bytes: int) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_javf(MODALITY_VIDEO, n_bytes, [fp.to_bytes() for fp in fingerprints]))


def write_audio_javf(path, segments, n_bytes: int) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_javf(MODALITY_AUDIO, n_bytes, [s.to_bytes() for s in segments]))


def read_javf(path):
    """Returns (modality, width, records)."""
    with open(path, "rb") as fh:
        data = fh.read()
    modality, width, records, used = decode_javf(data)
    if used != len(data):
        raise ParseError("trailing bytes after JAVF payload")
    return modality, width, records


def records_to_keys(records: np.ndarray) -> np.ndarray:
    """Audio records (n, 4U) bytes -> (n, U) uint32 keys."""
    return np.ascontiguousarray(records).view("<u4")
