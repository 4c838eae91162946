"""Compare the count-chasing DP recurrence against exhaustive search.

The count-chasing variant extends whichever state the predecessor cell
realized: a take step from F(i-1, j, b - cV) adds fV[n+1] - fV[n] where n
is the realized video count of that predecessor.  Because the predecessor
may have realized fewer items than its (i-1, j) indices allow, the step
gain is path dependent and the table can miss the optimum.  The package's
DP instead tabulates exact-count states (see ``javrc.allocator.dp_table``).
"""

import argparse
import random

from javrc.allocator import CurvePair, RateModel, dp_allocate


def exhaustive(fv, fa, cv, ca, R, a):
    return max(
        a * fv[i] + (1 - a) * fa[j]
        for i in range(len(fv))
        for j in range(len(fa))
        if i * cv + j * ca <= R
    )


def count_chasing(fv, fa, cv, ca, R, a):
    NV, NA = len(fv) - 1, len(fa) - 1
    F, I, J = {}, {}, {}
    for i in range(NV + 1):
        for j in range(NA + 1):
            for b in range(R + 1):
                if i == j == 0:
                    F[i, j, b], I[i, j, b], J[i, j, b] = 0.0, 0, 0
                    continue
                opts = []
                if i > 0:
                    k = (i - 1, j, b)
                    opts.append((F[k], I[k], J[k]))
                if j > 0:
                    k = (i, j - 1, b)
                    opts.append((F[k], I[k], J[k]))
                if i > 0 and b >= cv:
                    k = (i - 1, j, b - cv)
                    n = I[k]
                    opts.append((F[k] + a * (fv[n + 1] - fv[n]), n + 1, J[k]))
                if j > 0 and b >= ca:
                    k = (i, j - 1, b - ca)
                    n = J[k]
                    opts.append((F[k] + (1 - a) * (fa[n + 1] - fa[n]), I[k], n + 1))
                best = max(range(len(opts)), key=lambda q: (opts[q][0], -q))
                F[i, j, b], I[i, j, b], J[i, j, b] = opts[best]
    return F[NV, NA, R]


def main():
    ap = argparse.ArgumentParser(description="count-chasing DP vs exhaustive search")
    ap.add_argument("--instances", type=int, default=300)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    rnd = random.Random(args.seed)
    chasing_bad = exact_bad = 0
    example = None
    for _ in range(args.instances):
        fv, fa = [0], [0]
        for _ in range(rnd.randint(0, 5)):
            fv.append(fv[-1] + rnd.choice([0, 0, 1, 3, 5]))
        for _ in range(rnd.randint(0, 5)):
            fa.append(fa[-1] + rnd.choice([0, 0, 1, 3, 5]))
        cv, ca, R = rnd.randint(1, 5), rnd.randint(1, 5), rnd.randint(0, 20)
        opt = exhaustive(fv, fa, cv, ca, R, 0.5)
        got = count_chasing(fv, fa, cv, ca, R, 0.5)
        if abs(got - opt) > 1e-9:
            chasing_bad += 1
            example = example or (fv, fa, cv, ca, R, got, opt)
        curves = CurvePair.from_arrays(fv, fa, 1.0, 1.0)
        exact_bad += dp_allocate(curves, RateModel(cv, ca, R), 0.5).coverage != opt
    print(f"count-chasing recurrence: {chasing_bad}/{args.instances} instances miss the optimum")
    print(f"exact-count DP:           {exact_bad}/{args.instances} instances miss the optimum")
    if example:
        fv, fa, cv, ca, R, got, opt = example
        print(f"first miss: fV={fv} fA={fa} cV={cv} cA={ca} R={R}: {got} < {opt}")


if __name__ == "__main__":
    main()
