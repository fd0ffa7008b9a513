"""Relative error of the Kubilius model against exact pattern counts.

Prints the error distribution and the worst patterns; with large N the
errors shrink like the inverse square root of the expected count.

    python scripts/kubilius_errors.py --N 1000000 --q 1 2 3 5 6
"""
import argparse
from fractions import Fraction

import numpy as np

from divlab.arith import sieve_primes
from divlab.sievekit import KubiliusSpec, iter_patterns, kubilius_compare, pattern_histogram


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--N", type=int, default=10**6)
    ap.add_argument("--q", type=int, nargs="+", default=[1, 2, 3, 5, 6])
    ap.add_argument("--h0", type=int, default=11)
    ap.add_argument("--h", type=int, default=101)
    ap.add_argument("--min-model", type=float, default=1e-3)
    args = ap.parse_args()

    pw = sieve_primes(args.h0, args.h)
    rows = []
    for q in args.q:
        for shifts in ((0,), (0, 1)):
            for a in range(q):
                hist = pattern_histogram(pw, args.N, a, q, shifts)
                cut = Fraction(args.min_model).limit_denominator(10**9) * q
                for pat, _ in iter_patterns(pw, a, q, shifts, cut):
                    c = kubilius_compare(KubiliusSpec(a, q, shifts, pat), pw, args.N, hist)
                    # expected count gives the sampling scale of the error
                    sigma = 1 / np.sqrt(float(c.model_value) * args.N)
                    rows.append((q, a, shifts, c.relative_error, float(c.model_value), sigma))
    err = np.array([r[3] for r in rows])
    z = np.array([r[3] / r[5] for r in rows])
    print(f"{len(rows)} patterns, median error {np.median(err):.4f}, max {err.max():.4f}, "
          f"above 5%: {(err > 0.05).sum()}")
    print(f"error / (1/sqrt(expected count)): median {np.median(z):.2f}, max {z.max():.2f}")
    for r in sorted(rows, key=lambda r: -r[3])[:10]:
        print(f"q={r[0]} a={r[1]} shifts={r[2]} err={r[3]:.4f} model={r[4]:.2e} 1/sqrt(count)={r[5]:.4f}")


if __name__ == "__main__":
    main()
