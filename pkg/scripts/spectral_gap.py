"""Top eigenvalue of A on consecutive windows, before and after removing X0.

    python scripts/spectral_gap.py --start 1000000 --length 100000 --windows 10
"""
import argparse
import math
import time

from divlab.arith import sieve_primes
from divlab.divgraph import compute_X0_mask, compute_Yl_mask, make_operator
from divlab.spectral import extreme_eigenvalues


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--start", type=int, default=10**6)
    ap.add_argument("--length", type=int, default=10**5)
    ap.add_argument("--windows", type=int, default=10)
    ap.add_argument("--h0", type=int, default=11)
    ap.add_argument("--h", type=int, default=101)
    ap.add_argument("--K", type=float, default=4.0)
    ap.add_argument("--ell", type=int, default=2)
    args = ap.parse_args()

    pw = sieve_primes(args.h0, args.h)
    scale = math.sqrt(args.K * pw.L)
    print(f"L = {pw.L:.5f}, sqrt(KL) = {scale:.4f}")
    print("start\tx0_excl\tyl_excl\tfull\trestricted\tratio\tseconds")
    for j in range(args.windows):
        t0 = time.perf_counter()
        start = args.start + j * args.length
        op = make_operator(start, args.length, pw)
        x0 = compute_X0_mask(op.table, args.K)
        yl = compute_Yl_mask(op.table, pw, args.ell)
        full = abs(extreme_eigenvalues(op, 1, seed=j + 1).values[0])
        rest = abs(extreme_eigenvalues(op.restricted(x0 & yl), 1, seed=j + 1).values[0])
        print(f"{start}\t{args.length - x0.cardinality}\t{args.length - yl.cardinality}\t"
              f"{full:.4f}\t{rest:.4f}\t{rest / scale:.4f}\t{time.perf_counter() - t0:.1f}")


if __name__ == "__main__":
    main()
