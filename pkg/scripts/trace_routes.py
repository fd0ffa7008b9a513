"""Compare the three routes to tr A^{2k}: dense powers, zero-sum walks, random probes.

    python scripts/trace_routes.py --length 400 --primes 7 11 13 --k 3
"""
import argparse

from divlab.arith import PrimeWindow
from divlab.divgraph import assemble_dense, make_operator
from divlab.spectral import trace_dense_power, trace_stochastic, trace_walk_sum


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--start", type=int, default=10**4)
    ap.add_argument("--length", type=int, default=400)
    ap.add_argument("--primes", type=int, nargs="+", default=[7, 11, 13])
    ap.add_argument("--k", type=int, default=3)
    ap.add_argument("--samples", type=int, default=64)
    args = ap.parse_args()

    op = make_operator(args.start, args.length, PrimeWindow.from_primes(args.primes))
    M = assemble_dense(op)
    print("k\tdense\twalk_sum\tstochastic\tstderr")
    for k in range(1, args.k + 1):
        d = trace_dense_power(M, k).value
        w = trace_walk_sum(op, k).value
        s = trace_stochastic(op, k, samples=args.samples, seed=k)
        print(f"{k}\t{d:.10g}\t{w:.10g}\t{s.value:.6g}\t{s.stderr:.3g}")


if __name__ == "__main__":
    main()
