"""Greedy vs optimal allocation on the two-rectangles/one-circle knapsack.

Rectangles: 99 bytes, value 10 each.  Circle: 100 bytes, value 15.  Limit 198.
Greedy takes the circle (best value per byte) and then nothing else fits;
the optimum takes both rectangles.
"""

import argparse

from javrc.allocator import CurvePair, RateModel, brute_force_allocate, dp_allocate, greedy_allocate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rect", type=int, default=99, help="rectangle weight")
    ap.add_argument("--circle", type=int, default=100, help="circle weight")
    ap.add_argument("--limit", type=int, default=198)
    args = ap.parse_args()

    curves = CurvePair.from_arrays([0, 10, 20], [0, 15], n_video=0.5, n_audio=0.5)
    rm = RateModel(args.rect, args.circle, args.limit)
    for fn in (greedy_allocate, dp_allocate, brute_force_allocate):
        r = fn(curves, rm, 0.5)
        print(f"{r.method:12s} value={r.coverage:5.1f} rectangles={r.n_video} circles={r.n_audio} bytes={r.rate}")


if __name__ == "__main__":
    main()
