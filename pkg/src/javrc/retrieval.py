"""Representative database, query-by-example and expected accuracy.

A query counts as correct when its ground-truth point appears in a cover
set returned for it.  ``nearest`` mode returns the single closest
representative's cover set; ``probe_all`` returns the cover sets of every
representative within the probe radius.
"""

from __future__ import annotations

import struct
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .allocator import AllocationResult, RateModel
from .coverage import RepresentativeSet, within
from .errors import EmptyDatabase, IncompatibleFingerprints, InconsistentAllocation, ParseError, UnsupportedFormat
from .fingerprint import (
    _POPCOUNT,
    JAVF_HEADER_SIZE,
    MODALITY_AUDIO,
    MODALITY_VIDEO,
    decode_javf,
    encode_javf,
    records_to_keys,
)

MODES = ("nearest", "probe_all")


def representatives_for(reps: RepresentativeSet, k: int) -> RepresentativeSet:
    """First ``k`` greedy picks; if the greedy run stopped early (everything
    covered), pad with the lowest-index unused points holding empty cover
    sets so that exactly ``k`` fingerprints are stored."""
    out = reps.prefix(k)
    if len(out.reps) < k:
        used = set(out.reps)
        filler = [p for p in range(reps.n) if p not in used][: k - len(out.reps)]
        if len(out.reps) + len(filler) < k:
            raise InconsistentAllocation(f"only {reps.n} points, {k} representatives requested")
        out = RepresentativeSet(
            out.reps + filler,
            out.cover_sets + [np.zeros(0, dtype=np.int64)] * len(filler),
            reps.n,
            reps.radius,
            reps.k_cap,
            reps.mode,
        )
    return out


@dataclass
class RepresentativeDatabase:
    K: int
    r_video: float
    r_audio: float
    cost_video: int
    cost_audio: int
    video_records: np.ndarray  # (N_V, cost_video) uint8
    audio_records: np.ndarray  # (N_A, cost_audio) uint8
    video_ids: np.ndarray  # corpus index of each stored representative
    audio_ids: np.ndarray
    video_covers: list[np.ndarray]
    audio_covers: list[np.ndarray]
    n_corpus_video: int
    n_corpus_audio: int
    audio_meta: list[tuple[int, int]] = field(default_factory=list)  # (timestamp ms, title id)
    index: dict[int, list[tuple[int, int, int]]] = field(default_factory=dict)

    @property
    def n_video(self) -> int:
        return len(self.video_records)

    @property
    def n_audio(self) -> int:
        return len(self.audio_records)

    @property
    def byte_size(self) -> int:
        return self.cost_video * self.n_video + self.cost_audio * self.n_audio

    @property
    def audio_keys(self) -> np.ndarray:
        return records_to_keys(self.audio_records)

    def coverage(self, modality: str) -> float:
        covers, n = (
            (self.video_covers, self.n_corpus_video) if modality == "video" else (self.audio_covers, self.n_corpus_audio)
        )
        if n == 0:
            return 0.0
        return sum(len(c) for c in covers) / n


def _build_index(keys: np.ndarray, meta) -> dict:
    index: dict[int, list[tuple[int, int, int]]] = {}
    for slot, row in enumerate(keys):
        ts, title = meta[slot]
        for key in sorted(set(row.tolist())):
            index.setdefault(key, []).append((slot, ts, title))
    return dict(sorted(index.items()))


def build_database(
    alloc: AllocationResult,
    video_reps: RepresentativeSet,
    audio_reps: RepresentativeSet,
    video_corpus: np.ndarray,
    audio_corpus: np.ndarray,
    rm: RateModel,
    K: int,
    r_video: float,
    r_audio: float,
    audio_meta=None,
) -> RepresentativeDatabase:
    """Store the allocated representatives.

    ``video_corpus``/``audio_corpus`` hold every fingerprint record as raw
    bytes (one row per point); ``audio_meta`` optionally gives
    ``(timestamp, title_id)`` per corpus segment for the hash index.
    """
    if len(video_reps.reps) != alloc.n_video or len(audio_reps.reps) != alloc.n_audio:
        raise InconsistentAllocation(
            f"allocation ({alloc.n_video}, {alloc.n_audio}) vs representative sets "
            f"({len(video_reps.reps)}, {len(audio_reps.reps)})"
        )
    video_corpus = np.asarray(video_corpus, dtype=np.uint8).reshape(-1, rm.cost_video)
    audio_corpus = np.asarray(audio_corpus, dtype=np.uint8).reshape(-1, rm.cost_audio)
    for reps in (video_reps, audio_reps):
        if any(len(c) > K for c in reps.cover_sets):
            raise InconsistentAllocation(f"a cover set exceeds K={K}")
    vids = np.array(video_reps.reps, dtype=np.int64)
    aids = np.array(audio_reps.reps, dtype=np.int64)
    audio_records = audio_corpus[aids]
    meta_src = audio_meta if audio_meta is not None else [(0, 0)] * len(audio_corpus)
    meta = [tuple(int(x) for x in meta_src[i]) for i in aids]
    db = RepresentativeDatabase(
        K=K,
        r_video=float(r_video),
        r_audio=float(r_audio),
        cost_video=rm.cost_video,
        cost_audio=rm.cost_audio,
        video_records=video_corpus[vids],
        audio_records=audio_records,
        video_ids=vids,
        audio_ids=aids,
        video_covers=[np.asarray(c, dtype=np.int64) for c in video_reps.cover_sets],
        audio_covers=[np.asarray(c, dtype=np.int64) for c in audio_reps.cover_sets],
        n_corpus_video=len(video_corpus),
        n_corpus_audio=len(audio_corpus),
        audio_meta=meta,
    )
    db.index = _build_index(db.audio_keys, meta)
    if db.byte_size != rm.rate(alloc.n_video, alloc.n_audio):
        raise InconsistentAllocation("stored bytes disagree with the allocation rate")
    return db


@dataclass
class QueryResult:
    candidates: list[tuple[int, float]]  # (slot, distance), ascending
    cover_sets: list[np.ndarray]
    correct: bool | None = None

    def contains(self, point_id: int) -> bool:
        return any(np.any(c == point_id) for c in self.cover_sets)

    def hit_rep(self, point_id: int) -> tuple[int, float] | None:
        for cand, cover in zip(self.candidates, self.cover_sets):
            if np.any(cover == point_id):
                return cand
        return None


def _select(distances: dict[int, float] | np.ndarray, slots, radius, mode, covers) -> QueryResult:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    pairs = sorted((float(d), int(s)) for s, d in zip(slots, distances))
    if mode == "nearest":
        pairs = pairs[:1]
    else:
        pairs = [p for p in pairs if within(p[0], radius)]
    return QueryResult([(s, d) for d, s in pairs], [covers[s] for _, s in pairs])


def query_video(db: RepresentativeDatabase, q, mode: str = "nearest") -> QueryResult:
    """``q`` is a VideoFingerprint or its packed bytes."""
    if db.n_video == 0:
        raise EmptyDatabase("no video representatives")
    bits = np.asarray(getattr(q, "bits", q), dtype=np.uint8)
    if bits.shape != (db.cost_video,):
        raise IncompatibleFingerprints(f"query has {bits.size} bytes, database stores {db.cost_video}")
    d = _POPCOUNT[np.bitwise_xor(db.video_records, bits)].sum(axis=1)
    return _select(d, range(db.n_video), db.r_video, mode, db.video_covers)


def _shared(a: Counter, b: Counter) -> int:
    return sum((a & b).values())


def query_audio(db: RepresentativeDatabase, q, mode: str = "nearest") -> QueryResult:
    """``q`` is an AudioSegment or a sequence of keys.  Only representatives
    sharing at least one key (found through the hash index) are ranked."""
    if db.n_audio == 0:
        raise EmptyDatabase("no audio representatives")
    keys = list(getattr(q, "keys", q))
    u = db.cost_audio // 4
    if len(keys) != u:
        raise IncompatibleFingerprints(f"query has {len(keys)} units, database segments hold {u}")
    slots = sorted({slot for k in set(keys) for slot, _, _ in db.index.get(int(k), ())})
    qc = Counter(int(k) for k in keys)
    stored = db.audio_keys
    d = [1.0 - _shared(qc, Counter(stored[s].tolist())) / u for s in slots]
    return _select(d, slots, db.r_audio, mode, db.audio_covers)


@dataclass
class AccuracyReport:
    modality: str
    mode: str
    hits: np.ndarray
    coverage: float
    log: list[dict]

    @property
    def T(self) -> int:
        return len(self.hits)

    @property
    def expected_accuracy(self) -> float:
        return float(self.hits.sum() / len(self.hits)) if len(self.hits) else 0.0


LOG_COLUMNS = ["query_id", "modality", "returned_rep", "distance", "correct"]


def evaluate_accuracy(db: RepresentativeDatabase, modality: str, corpus, query_ids, mode: str = "nearest") -> AccuracyReport:
    """Query with corpus points themselves; ground truth is point identity.

    ``corpus`` holds the raw records (video bytes or audio key rows).
    """
    query = query_video if modality == "video" else query_audio
    hits, log = [], []
    for qid in query_ids:
        res = query(db, corpus[qid], mode)
        hit = res.hit_rep(qid)
        res.correct = hit is not None
        shown = hit or (res.candidates[0] if res.candidates else None)
        hits.append(1 if res.correct else 0)
        log.append(
            {
                "query_id": int(qid),
                "modality": modality,
                "returned_rep": shown[0] if shown else -1,
                "distance": repr(float(shown[1])) if shown else "",
                "correct": int(res.correct),
            }
        )
    return AccuracyReport(modality, mode, np.array(hits, dtype=np.int64), db.coverage(modality), log)


# ---------------------------------------------------------------------------
# JAVD container
# ---------------------------------------------------------------------------

JAVD_MAGIC = b"JAVD"
JAVD_VERSION = 1
_JAVD_HEADER = struct.Struct("<4sHIddHHIIII")
JAVD_HEADER_SIZE = _JAVD_HEADER.size


def _u32s(values) -> bytes:
    values = list(values)
    return struct.pack(f"<I{len(values)}I", len(values), *values)


def encode_database(db: RepresentativeDatabase) -> bytes:
    """Layout (little-endian):

    header (46 bytes): magic, version u16, K u32, r_video f64, r_audio f64,
        cost_video u16, cost_audio u16, n_video u32, n_audio u32,
        n_corpus_video u32, n_corpus_audio u32
    video JAVF block, audio JAVF block   (payload = the allocation byte rate)
    corpus ids: u32 list for video reps, then audio reps
    cover sets: one u32 list per video rep, then per audio rep
    hash index: n_keys u32, then per key: key u32, n u32, n x (slot, ts, title) u32
    Each "u32 list" is a u32 count followed by the values.
    """
    out = [
        _JAVD_HEADER.pack(
            JAVD_MAGIC,
            JAVD_VERSION,
            db.K,
            db.r_video,
            db.r_audio,
            db.cost_video,
            db.cost_audio,
            db.n_video,
            db.n_audio,
            db.n_corpus_video,
            db.n_corpus_audio,
        ),
        encode_javf(MODALITY_VIDEO, db.cost_video, db.video_records),
        encode_javf(MODALITY_AUDIO, db.cost_audio, db.audio_records),
        _u32s(db.video_ids),
        _u32s(db.audio_ids),
    ]
    out += [_u32s(c) for c in db.video_covers]
    out += [_u32s(c) for c in db.audio_covers]
    out.append(struct.pack("<I", len(db.index)))
    for key, entries in db.index.items():
        out.append(struct.pack("<II", key, len(entries)))
        for entry in entries:
            out.append(struct.pack("<III", *entry))
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes, pos: int):
        self.data, self.pos = data, pos

    def take(self, fmt: str):
        s = struct.Struct(fmt)
        if self.pos + s.size > len(self.data):
            raise ParseError("truncated JAVD file")
        vals = s.unpack_from(self.data, self.pos)
        self.pos += s.size
        return vals

    def u32_list(self) -> np.ndarray:
        (n,) = self.take("<I")
        return np.array(self.take(f"<{n}I"), dtype=np.int64)


def decode_database(data: bytes) -> RepresentativeDatabase:
    if len(data) < JAVD_HEADER_SIZE:
        raise ParseError("truncated JAVD header")
    magic, version, K, rv, ra, cv, ca, nv, na, ncv, nca = _JAVD_HEADER.unpack_from(data, 0)
    if magic != JAVD_MAGIC:
        raise ParseError("bad JAVD magic")
    if version != JAVD_VERSION:
        raise UnsupportedFormat(f"JAVD version {version}")
    pos = JAVD_HEADER_SIZE
    _, _, vrec, used = decode_javf(data, pos)
    pos += used
    _, _, arec, used = decode_javf(data, pos)
    pos += used
    if len(vrec) != nv or len(arec) != na:
        raise ParseError("record counts disagree with header")
    r = _Reader(data, pos)
    vids, aids = r.u32_list(), r.u32_list()
    vcov = [r.u32_list() for _ in range(nv)]
    acov = [r.u32_list() for _ in range(na)]
    (n_keys,) = r.take("<I")
    index = {}
    for _ in range(n_keys):
        key, n = r.take("<II")
        index[key] = [tuple(r.take("<III")) for _ in range(n)]
    if r.pos != len(data):
        raise ParseError("trailing bytes after JAVD index")
    meta = {}
    for entries in index.values():
        for slot, ts, title in entries:
            meta[slot] = (ts, title)
    return RepresentativeDatabase(
        K=K,
        r_video=rv,
        r_audio=ra,
        cost_video=cv,
        cost_audio=ca,
        video_records=vrec.reshape(nv, cv),
        audio_records=arec.reshape(na, ca),
        video_ids=vids,
        audio_ids=aids,
        video_covers=vcov,
        audio_covers=acov,
        n_corpus_video=ncv,
        n_corpus_audio=nca,
        audio_meta=[meta.get(s, (0, 0)) for s in range(na)],
        index=index,
    )


def payload_size(db: RepresentativeDatabase) -> int:
    """Bytes of stored fingerprints inside an encoded database (excludes all headers)."""
    return db.byte_size


FIXED_OVERHEAD = JAVD_HEADER_SIZE + 2 * JAVF_HEADER_SIZE
