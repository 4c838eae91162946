"""Byte-budget allocation between video and audio representatives.

The objective is separable: ``value(i, j) = alpha * fV[i] / nV +
(1 - alpha) * fA[j] / nA`` subject to ``cV * i + cA * j <= budget``.
Every method evaluates a candidate through :meth:`CurvePair.value` so values
coming from different methods compare exactly.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import UseLagrangianMode

DEFAULT_MAX_CELLS = 2_000_000_000


@dataclass(frozen=True)
class CurvePair:
    """Coverage curves (counts) plus the totals used to turn them into fractions."""

    video: np.ndarray
    audio: np.ndarray
    n_video: float
    n_audio: float

    @classmethod
    def from_curves(cls, video, audio) -> "CurvePair":
        return cls(np.asarray(video.f, dtype=np.float64), np.asarray(audio.f, dtype=np.float64), video.n, audio.n)

    @classmethod
    def from_arrays(cls, video, audio, n_video=None, n_audio=None) -> "CurvePair":
        video = np.asarray(video, dtype=np.float64)
        audio = np.asarray(audio, dtype=np.float64)
        return cls(
            video,
            audio,
            float(n_video if n_video is not None else (video[-1] or 1)),
            float(n_audio if n_audio is not None else (audio[-1] or 1)),
        )

    @property
    def max_video(self) -> int:
        return len(self.video) - 1

    @property
    def max_audio(self) -> int:
        return len(self.audio) - 1

    def weighted(self, alpha: float) -> tuple[np.ndarray, np.ndarray]:
        if not 0.0 <= alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        # an empty modality (no fingerprints at all) contributes nothing
        fv = self.video / self.n_video if self.n_video else np.zeros_like(self.video)
        fa = self.audio / self.n_audio if self.n_audio else np.zeros_like(self.audio)
        return alpha * fv, (1.0 - alpha) * fa

    def value(self, alpha: float, n_video: int, n_audio: int) -> float:
        wv, wa = self.weighted(alpha)
        return float(wv[n_video] + wa[n_audio])


@dataclass(frozen=True)
class RateModel:
    cost_video: int
    cost_audio: int
    budget: int
    max_video: int | None = None
    max_audio: int | None = None

    def __post_init__(self):
        if self.cost_video <= 0 or self.cost_audio <= 0:
            raise ValueError("fingerprint costs must be positive")
        if self.budget < 0:
            raise ValueError("budget must be non-negative")

    def rate(self, n_video: int, n_audio: int) -> int:
        return self.cost_video * n_video + self.cost_audio * n_audio

    def limits(self, curves: CurvePair) -> tuple[int, int]:
        nv = curves.max_video if self.max_video is None else self.max_video
        na = curves.max_audio if self.max_audio is None else self.max_audio
        if nv > curves.max_video or na > curves.max_audio:
            raise ValueError("curves are shorter than the available fingerprint counts")
        return nv, na

    def with_budget(self, budget: int) -> "RateModel":
        return RateModel(self.cost_video, self.cost_audio, budget, self.max_video, self.max_audio)

    def total_bytes(self, curves: CurvePair) -> int:
        return self.rate(*self.limits(curves))


@dataclass
class AllocationResult:
    method: str
    n_video: int
    n_audio: int
    rate: int
    coverage: float
    budget: int
    trace: str = ""
    lam: float | None = None


def _result(method, curves, rm, alpha, nv, na, trace="", lam=None) -> AllocationResult:
    return AllocationResult(method, nv, na, rm.rate(nv, na), curves.value(alpha, nv, na), rm.budget, trace, lam)


def arbitrary_allocate(curves: CurvePair, rm: RateModel, alpha: float) -> AllocationResult:
    """Half the budget to each modality; a saturated side spills to the other."""
    NV, NA = rm.limits(curves)
    R = rm.budget
    nv = min(NV, R // (2 * rm.cost_video))
    na = min(NA, R // (2 * rm.cost_audio))
    if nv == NV:
        na = min(NA, (R - rm.cost_video * nv) // rm.cost_audio)
    if na == NA:
        nv = min(NV, (R - rm.cost_audio * na) // rm.cost_video)
    return _result("arbitrary", curves, rm, alpha, nv, na)


def audio_first_allocate(curves: CurvePair, rm: RateModel, alpha: float) -> AllocationResult:
    NV, NA = rm.limits(curves)
    na = min(NA, rm.budget // rm.cost_audio)
    nv = min(NV, (rm.budget - rm.cost_audio * na) // rm.cost_video)
    return _result("audio_first", curves, rm, alpha, nv, na)


def greedy_allocate(
    curves: CurvePair,
    rm: RateModel,
    alpha: float,
    lam: float = 0.0,
    per_byte: bool = True,
) -> AllocationResult:
    """Take whichever modality offers the larger immediate gain until nothing fits.

    ``per_byte=True`` scores a step by coverage gained per byte; otherwise by
    ``gain + lam * cost`` with ``lam <= 0`` acting as a per-byte penalty.
    Ties go to audio.
    """
    if not per_byte and lam > 0:
        raise ValueError("lam must be <= 0 in additive mode")
    NV, NA = rm.limits(curves)
    wv, wa = curves.weighted(alpha)
    nv = na = 0
    spent = 0
    trace = []
    while True:
        can_v = nv < NV and spent + rm.cost_video <= rm.budget
        can_a = na < NA and spent + rm.cost_audio <= rm.budget
        if not (can_v or can_a):
            break
        if per_byte:
            gv = (wv[nv + 1] - wv[nv]) / rm.cost_video if can_v else -math.inf
            ga = (wa[na + 1] - wa[na]) / rm.cost_audio if can_a else -math.inf
        else:
            gv = wv[nv + 1] - wv[nv] + lam * rm.cost_video if can_v else -math.inf
            ga = wa[na + 1] - wa[na] + lam * rm.cost_audio if can_a else -math.inf
        if can_a and ga >= gv:
            na += 1
            spent += rm.cost_audio
            trace.append("A")
        else:
            nv += 1
            spent += rm.cost_video
            trace.append("V")
    return _result("greedy", curves, rm, alpha, nv, na, "".join(trace), None if per_byte else lam)


@dataclass
class DpTable:
    """Final DP row: best value and realized counts per tabulated budget."""

    unit: int
    budgets: np.ndarray  # in budget units, ascending
    F: np.ndarray
    I: np.ndarray
    J: np.ndarray

    def lookup(self, budget: int) -> tuple[float, int, int]:
        b = budget // self.unit
        k = int(np.searchsorted(self.budgets, b))
        if k == len(self.budgets) or self.budgets[k] != b:
            raise KeyError(f"budget {budget} was not tabulated")
        return float(self.F[k]), int(self.I[k]), int(self.J[k])


def dp_table(
    curves: CurvePair,
    rm: RateModel,
    alpha: float,
    max_cells: int = DEFAULT_MAX_CELLS,
    budgets=None,
) -> DpTable:
    """Fill F_{i,j}(b) over counts i <= NV, j <= NA and budget units b.

    Budget unit is gcd(cV, cA).  Each state takes the best of: skip video
    (F_{i-1,j}), skip audio (F_{i,j-1}), or take the last fingerprint, which
    reaches exactly (i, j) whenever i*cV + j*cA <= b; the step gain depends
    only on the transition, never on earlier states.  The skip-audio chain
    is a running maximum over j, so each video row is one vectorized pass.
    On ties the state found first wins: smaller j, and skip video before
    take.

    No transition moves between budgets, so only the budgets asked for are
    tabulated (``budgets=None`` means every unit up to ``rm.budget``).
    Counts beyond what the largest budget can afford are trimmed since those
    states equal their predecessors.
    """
    NV, NA = rm.limits(curves)
    unit = math.gcd(rm.cost_video, rm.cost_audio)
    if budgets is None:
        b = np.arange(rm.budget // unit + 1)
    else:
        b = np.unique(np.asarray([int(x) // unit for x in budgets], dtype=np.int64))
    B = int(b[-1]) if len(b) else 0
    cv, ca = rm.cost_video // unit, rm.cost_audio // unit
    NV, NA = min(NV, B // cv), min(NA, B // ca)
    cells = (NV + 1) * (NA + 1) * len(b)
    if cells > max_cells:
        raise UseLagrangianMode(f"DP grid of {cells} cells exceeds the bound of {max_cells}")
    wv, wa = curves.weighted(alpha)
    j_col = np.arange(NA + 1)[:, None]
    F = S = None  # best value and packed state i * (NA + 1) + j, per (j, budget)
    for i in range(NV + 1):
        H = np.where(i * cv + j_col * ca <= b[None, :], (wv[i] + wa[: NA + 1])[:, None], -np.inf)
        take = np.broadcast_to(i * (NA + 1) + j_col, H.shape)
        if F is None:
            G, src = H, take
        else:
            keep = F >= H  # skip video
            G, src = np.where(keep, F, H), np.where(keep, S, take)
        # skip audio: a running maximum down the j axis, first maximum kept
        F = np.maximum.accumulate(G, axis=0)
        record = np.ones(G.shape, dtype=bool)
        record[1:] = G[1:] > F[:-1]
        first = np.maximum.accumulate(np.where(record, j_col, 0), axis=0)
        S = np.take_along_axis(src, first, axis=0)
    last = S[NA]
    return DpTable(unit, b, F[NA], last // (NA + 1), last % (NA + 1))


def dp_allocate(
    curves: CurvePair,
    rm: RateModel,
    alpha: float,
    max_cells: int = DEFAULT_MAX_CELLS,
    table: DpTable | None = None,
) -> AllocationResult:
    """Exact optimum by budget-indexed dynamic programming."""
    table = table or dp_table(curves, rm, alpha, max_cells, budgets=[rm.budget])
    _, nv, na = table.lookup(rm.budget)
    return _result("dp", curves, rm, alpha, nv, na, "V" * nv + "A" * na)


def upper_hull(xs, ys) -> list[int]:
    """Indices of the upper concave envelope of points sorted by x."""
    hull: list[int] = []
    for k in range(len(xs)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # drop b if it lies on or below segment a -> k
            if (ys[b] - ys[a]) * (xs[k] - xs[a]) <= (ys[k] - ys[a]) * (xs[b] - xs[a]):
                hull.pop()
            else:
                break
        hull.append(k)
    return hull


def _best_on_hull(values, cost, hull, lam) -> int:
    # walk the envelope while the next edge still pays for itself at price -lam
    k = 0
    while k + 1 < len(hull):
        a, b = hull[k], hull[k + 1]
        if values[b] - values[a] + lam * cost * (b - a) > 0:
            k += 1
        else:
            break
    return hull[k]


def lagrangian_allocate(
    curves: CurvePair,
    rm: RateModel,
    alpha: float,
    tol: float = 0.0,
    max_iter: int = 200,
    log: list | None = None,
) -> AllocationResult:
    """Bisection on lam <= 0 for the relaxed objective value + lam * rate.

    Each modality is maximized independently on its upper concave envelope,
    so only hull points of the rate-coverage frontier are reachable.
    Returns the feasible point with the largest rate found; ``log`` (if
    given) receives ``(lam, rate)`` per evaluation.
    """
    NV, NA = rm.limits(curves)
    wv, wa = curves.weighted(alpha)
    wv, wa = wv[: NV + 1], wa[: NA + 1]
    hv = upper_hull(np.arange(NV + 1), wv)
    ha = upper_hull(np.arange(NA + 1), wa)

    def solve(lam):
        nv = _best_on_hull(wv, rm.cost_video, hv, lam)
        na = _best_on_hull(wa, rm.cost_audio, ha, lam)
        rate = rm.rate(nv, na)
        if log is not None:
            log.append((lam, rate))
        return nv, na, rate

    nv, na, rate = solve(0.0)
    lam_ok = 0.0
    if rate > rm.budget:
        slopes = [0.0]
        slopes += [abs(wv[i + 1] - wv[i]) / rm.cost_video for i in range(NV)]
        slopes += [abs(wa[j + 1] - wa[j]) / rm.cost_audio for j in range(NA)]
        lo, hi = -2.0 * max(slopes) - 1.0, 0.0
        lam_ok = lo
        nv, na, rate = solve(lo)
        for _ in range(max_iter):
            if rm.budget - rate <= tol or hi - lo <= 1e-15 * max(1.0, abs(lo)):
                break
            mid = 0.5 * (lo + hi)
            mv, ma, mr = solve(mid)
            if mr <= rm.budget:
                lo, lam_ok = mid, mid
                nv, na, rate = mv, ma, mr
            else:
                hi = mid
    return _result("lagrangian", curves, rm, alpha, nv, na, lam=lam_ok)


def brute_force_allocate(curves: CurvePair, rm: RateModel, alpha: float) -> AllocationResult:
    """Enumerate the video count; audio takes all the remaining budget
    (optimal because audio coverage never decreases)."""
    NV, NA = rm.limits(curves)
    wv, wa = curves.weighted(alpha)
    best = None
    for nv in range(min(NV, rm.budget // rm.cost_video) + 1):
        na = min(NA, (rm.budget - rm.cost_video * nv) // rm.cost_audio)
        v = wv[nv] + wa[na]
        if best is None or v > best[0]:
            best = (v, nv, na)
    return _result("brute_force", curves, rm, alpha, best[1], best[2])


METHODS = {
    "arbitrary": arbitrary_allocate,
    "audio_first": audio_first_allocate,
    "greedy": greedy_allocate,
    "dp": dp_allocate,
    "lagrangian": lagrangian_allocate,
    "brute_force": brute_force_allocate,
}


def rate_coverage_series(method: str, curves: CurvePair, rm: RateModel, alpha: float, budgets) -> list[AllocationResult]:
    budgets = [int(b) for b in budgets]
    if budgets != sorted(budgets):
        raise ValueError("budgets must be sorted ascending")
    if method == "dp":
        if not budgets:
            return []
        table = dp_table(curves, rm.with_budget(budgets[-1]), alpha, budgets=budgets)
        return [dp_allocate(curves, rm.with_budget(b), alpha, table=table) for b in budgets]
    fn = METHODS[method]
    return [fn(curves, rm.with_budget(b), alpha) for b in budgets]


SERIES_COLUMNS = ["budget_bytes", "coverage", "n_video", "n_audio", "method", "alpha", "threshold"]


def series_rows(results, alpha, threshold="") -> list[dict]:
    return [
        {
            "budget_bytes": r.budget,
            "coverage": repr(float(r.coverage)),
            "n_video": r.n_video,
            "n_audio": r.n_audio,
            "method": r.method,
            "alpha": repr(float(alpha)),
            "threshold": threshold,
        }
        for r in results
    ]


def series_to_csv(results, alpha, threshold="") -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SERIES_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(series_rows(results, alpha, threshold))
    return buf.getvalue()
