"""Coverage against retrieval accuracy (nearest and probe_all) on a clustered corpus."""

import argparse

import numpy as np

from javrc.allocator import CurvePair, RateModel, rate_coverage_series
from javrc.coverage import PointSet, coverage_curve
from javrc.ingest import SyntheticCloudSpec, synth_points
from javrc.retrieval import build_database, evaluate_accuracy, representatives_for


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--spread", type=int, default=60, help="video cluster spread in bits")
    ap.add_argument("-K", type=int, default=32)
    ap.add_argument("--points", type=int, default=10, help="budgets in the grid")
    args = ap.parse_args()

    v = synth_points(SyntheticCloudSpec(n_points=600, n_clusters=30, spread=args.spread, dimension=1280, seed=args.seed))
    a = synth_points(SyntheticCloudSpec(n_points=500, n_clusters=25, spread=2, dimension=8, kind="keys", seed=args.seed + 1))
    rv, ra = args.spread, 0.375
    cv = coverage_curve(PointSet.from_labeled(v), rv, args.K)
    ca = coverage_curve(PointSet.from_labeled(a), ra, args.K)
    curves = CurvePair.from_curves(cv, ca)
    rm = RateModel(160, 32, 0)
    grid = np.rint(np.linspace(0, rm.total_bytes(curves), args.points)).astype(int)
    abytes = a.points.astype("<u4").view(np.uint8).reshape(len(a.points), 32)
    print("budget  modality  coverage  nearest  probe_all")
    for res in rate_coverage_series("dp", curves, rm, 0.5, grid):
        db = build_database(
            res, representatives_for(cv.reps, res.n_video), representatives_for(ca.reps, res.n_audio), v.points, abytes, rm, args.K, rv, ra
        )
        for modality, corpus, n in (("video", v.points, db.n_video), ("audio", a.points, db.n_audio)):
            if n == 0:
                continue
            ids = range(len(corpus))
            near = evaluate_accuracy(db, modality, corpus, ids, "nearest").expected_accuracy
            probe = evaluate_accuracy(db, modality, corpus, ids, "probe_all").expected_accuracy
            print(f"{res.budget:6d}  {modality:8s}  {db.coverage(modality):8.3f}  {near:7.3f}  {probe:9.3f}")


if __name__ == "__main__":
    main()
