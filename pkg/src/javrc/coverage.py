"""Partial disk covering ("cover the most points with k disks of radius r").

Greedy robust k-center: repeatedly pick the radius-r disk holding the most
uncovered points, then mark points covered.  ``mode="approx"`` marks the
radius-3r expanded disk (the classical 3-approximation), ``mode="strict"``
marks only the radius-r disk so that every covered point really is within
the retrieval threshold of its representative.  A per-representative cap
``k_cap`` keeps only the nearest points of the marked region; the rest stay
uncovered.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow
from scipy.spatial.distance import cdist

from .errors import OracleTooLarge, ParseError
from .fingerprint import hamming_matrix, segment_distance_matrix

EPS = 1e-9
MODES = ("strict", "approx")


def within(d, r):
    """Distance test shared by covering and retrieval (tolerant to float noise)."""
    return d <= r + EPS


@dataclass
class PointSet:
    points: object
    distance: Callable | None = None
    modality: str = "video"
    matrix: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.points)

    def __len__(self):
        return self.n

    def distances(self) -> np.ndarray:
        if self.matrix is None:
            n = self.n
            m = np.zeros((n, n))
            for i in range(n):
                for j in range(i + 1, n):
                    m[i, j] = m[j, i] = self.distance(self.points[i], self.points[j])
            self.matrix = m
        return self.matrix

    @classmethod
    def from_bits(cls, packed, modality="video"):
        packed = np.asarray(packed, dtype=np.uint8)
        return cls(packed, modality=modality, matrix=hamming_matrix(packed))

    @classmethod
    def from_keys(cls, keys, modality="audio"):
        keys = np.asarray(keys)
        return cls(keys, modality=modality, matrix=segment_distance_matrix(keys))

    @classmethod
    def from_vectors(cls, vectors, metric="chebyshev", modality="video"):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim == 1:
            vectors = vectors[:, None]
        return cls(vectors, modality=modality, matrix=cdist(vectors, vectors, metric=metric))

    @classmethod
    def from_labeled(cls, cloud, modality=None):
        """Wrap an ``ingest.LabeledPoints`` with its natural metric."""
        if cloud.kind == "bits":
            return cls.from_bits(cloud.points, modality or "video")
        if cloud.kind == "keys":
            return cls.from_keys(cloud.points, modality or "audio")
        return cls.from_vectors(cloud.points, modality=modality or "video")


@dataclass
class Neighborhoods:
    G: np.ndarray  # (n, n) bool, within r
    E: np.ndarray  # (n, n) bool, within 3r
    radius: float


def build_neighborhoods(ps: PointSet, r: float) -> Neighborhoods:
    if r < 0:
        raise ValueError("radius must be non-negative")
    d = ps.distances()
    return Neighborhoods(G=within(d, r), E=within(d, 3 * r), radius=r)


@dataclass
class RepresentativeSet:
    reps: list[int]
    cover_sets: list[np.ndarray]
    n: int
    radius: float
    k_cap: int | None
    mode: str

    @property
    def covered_total(self) -> int:
        return int(sum(len(c) for c in self.cover_sets))

    @property
    def gains(self) -> list[int]:
        return [len(c) for c in self.cover_sets]

    def prefix(self, k: int) -> "RepresentativeSet":
        return RepresentativeSet(self.reps[:k], self.cover_sets[:k], self.n, self.radius, self.k_cap, self.mode)

    def covered_mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        for c in self.cover_sets:
            mask[c] = True
        return mask


def rkcp3(
    ps: PointSet,
    k: int,
    r: float,
    k_cap: int | None = None,
    mode: str = "approx",
    neighborhoods: Neighborhoods | None = None,
) -> RepresentativeSet:
    """Greedy heaviest-disk selection of up to ``k`` representatives.

    Ties go to the lowest point index.  Stops early once every point is
    covered.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    nb = neighborhoods or build_neighborhoods(ps, r)
    d = ps.distances()
    n = ps.n
    mark = nb.E if mode == "approx" else nb.G
    uncovered = np.ones(n, dtype=bool)
    weight = nb.G.sum(axis=1).astype(np.int64)
    reps, covers = [], []
    for _ in range(k):
        if not uncovered.any():
            break
        i = int(np.argmax(weight))
        idx = np.flatnonzero(mark[i] & uncovered)
        if k_cap is not None and len(idx) > k_cap:
            order = np.lexsort((idx, d[i, idx]))
            idx = np.sort(idx[order[:k_cap]])
        uncovered[idx] = False
        weight -= nb.G[:, idx].sum(axis=1)
        reps.append(i)
        covers.append(idx)
    return RepresentativeSet(reps, covers, n, r, k_cap, mode)


@dataclass
class CoverageCurve:
    """f[i] = points covered by the first i greedy representatives."""

    f: np.ndarray
    n: int
    radius: float = 0.0
    k_cap: int | None = None
    mode: str = "strict"
    reps: RepresentativeSet | None = field(default=None, repr=False)

    @property
    def n_max(self) -> int:
        return len(self.f) - 1

    def fraction(self) -> np.ndarray:
        return self.f / self.n if self.n else np.zeros(len(self.f))

    def check(self) -> None:
        f = self.f
        if f[0] != 0:
            raise ValueError("f[0] must be 0")
        step = np.diff(f)
        if np.any(step < 0):
            raise ValueError("coverage curve must be non-decreasing")
        if self.k_cap is not None and np.any(step > self.k_cap):
            raise ValueError("a representative covers more than k_cap points")
        if f[-1] > self.n:
            raise ValueError("coverage exceeds the point count")


def coverage_curve(
    ps: PointSet,
    r: float,
    k_cap: int | None = None,
    n_max: int | None = None,
    mode: str = "strict",
) -> CoverageCurve:
    """One greedy run to ``n_max`` picks (default: every point)."""
    n_max = ps.n if n_max is None else n_max
    if n_max > ps.n:
        raise ValueError("cannot pick more representatives than points")
    reps = rkcp3(ps, n_max, r, k_cap, mode)
    f = np.zeros(n_max + 1, dtype=np.int64)
    f[1 : len(reps.gains) + 1] = np.cumsum(reps.gains)
    f[len(reps.gains) + 1 :] = f[len(reps.gains)]
    return CoverageCurve(f, ps.n, r, k_cap, mode, reps)


def brute_force_cover(ps: PointSet, k: int, r: float, k_cap: int | None = None) -> int:
    """Exact best coverage over all k-subsets of input points as centers."""
    n = ps.n
    if not (n <= 25 or k <= 3):
        raise OracleTooLarge(f"C({n}, {k}) subsets")
    k = min(k, n)
    if k == 0:
        return 0
    G = within(ps.distances(), r)
    if k_cap is None:
        masks = [int("".join("1" if x else "0" for x in row[::-1]), 2) for row in G]
        best = 0
        for combo in itertools.combinations(range(n), k):
            m = 0
            for c in combo:
                m |= masks[c]
            best = max(best, bin(m).count("1"))
            if best == n:
                break
        return best
    best = 0
    for combo in itertools.combinations(range(n), k):
        best = max(best, _capped_cover(G, combo, k_cap))
        if best == n:
            break
    return best


def _capped_cover(G, centers, k_cap) -> int:
    # source -> center (cap) -> point (1) -> sink (1)
    n = G.shape[0]
    k = len(centers)
    size = 2 + k + n
    src, sink = 0, 1
    rows, cols, caps = [], [], []
    for a, c in enumerate(centers):
        rows.append(src), cols.append(2 + a), caps.append(k_cap)
        for p in np.flatnonzero(G[c]):
            rows.append(2 + a), cols.append(2 + k + p), caps.append(1)
    for p in range(n):
        rows.append(2 + k + p), cols.append(sink), caps.append(1)
    graph = csr_matrix((np.array(caps, dtype=np.int32), (rows, cols)), shape=(size, size))
    return int(maximum_flow(graph, src, sink).flow_value)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def curve_to_csv(curve: CoverageCurve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i", "f"])
    for i, v in enumerate(curve.f):
        w.writerow([i, int(v)])
    return buf.getvalue()


def curve_from_csv(text: str, n: int | None = None) -> CoverageCurve:
    """Parse ``i,f`` rows.  ``n`` defaults to the last index, which is the
    point count whenever the curve was run over the whole corpus."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["i", "f"]:
        raise ParseError("coverage CSV must start with header i,f")
    f = []
    for k, row in enumerate(rows[1:]):
        if int(row[0]) != k:
            raise ParseError(f"row {k} has index {row[0]}")
        f.append(int(row[1]))
    f = np.array(f, dtype=np.int64)
    return CoverageCurve(f, n if n is not None else len(f) - 1)
