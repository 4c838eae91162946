"""Optimal rate-coverage curves for tight vs diffuse synthetic corpora.

Writes a long-format CSV (pattern, budget_bytes, coverage, n_video, n_audio).
"""

import argparse

import numpy as np

from javrc.allocator import CurvePair, RateModel, rate_coverage_series
from javrc.coverage import PointSet, coverage_curve
from javrc.csvio import write_csv
from javrc.ingest import SyntheticCloudSpec, synth_points

PATTERNS = {
    # name: (video spread in bits, audio spread in keys)
    "tight": (8, 1),
    "medium": (60, 3),
    "diffuse": (200, 5),
}


def curves_for(vspread, aspread, seed, r_video, r_audio, K):
    v = synth_points(SyntheticCloudSpec(n_points=300, n_clusters=20, spread=vspread, dimension=1280, seed=seed))
    a = synth_points(SyntheticCloudSpec(n_points=240, n_clusters=20, spread=aspread, dimension=8, kind="keys", seed=seed + 1))
    cv = coverage_curve(PointSet.from_labeled(v), r_video, K)
    ca = coverage_curve(PointSet.from_labeled(a), r_audio, K)
    return CurvePair.from_curves(cv, ca)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--r-video", type=float, default=40)
    ap.add_argument("--r-audio", type=float, default=0.25)
    ap.add_argument("-K", type=int, default=16)
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--out", default="media_patterns.csv")
    args = ap.parse_args()

    rm = RateModel(160, 32, 0)
    rows = []
    grid = None
    for name, (vs, as_) in PATTERNS.items():
        curves = curves_for(vs, as_, args.seed, args.r_video, args.r_audio, args.K)
        if grid is None:
            grid = np.rint(np.linspace(0, rm.total_bytes(curves), 40)).astype(int)
        for r in rate_coverage_series("dp", curves, rm, args.alpha, grid):
            rows.append(
                {"pattern": name, "budget_bytes": r.budget, "coverage": repr(r.coverage), "n_video": r.n_video, "n_audio": r.n_audio}
            )
        mid = [r for r in rows if r["pattern"] == name][len(grid) // 4]
        print(f"{name:8s} coverage at {mid['budget_bytes']} bytes: {float(mid['coverage']):.3f}")
    write_csv(args.out, ["pattern", "budget_bytes", "coverage", "n_video", "n_audio"], rows, monotone=["coverage"], group_by="pattern")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
