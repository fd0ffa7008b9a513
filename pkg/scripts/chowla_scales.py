"""Logarithmic averages of f(n)f(n+1) and the scale average of |S(t)| for growing x.

    python scripts/chowla_scales.py --w 10000 --x 1e6 1e7 1e8
"""
import argparse
import time

from divlab.correlations import chowla_log_average, scale_average_abs


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--w", type=float, default=1e4)
    ap.add_argument("--x", type=float, nargs="+", default=[1e6, 1e7])
    ap.add_argument("--kind", default="liouville", choices=["liouville", "constant"])
    ap.add_argument("--abs", action="store_true", help="also integrate |S(t)| over the scales")
    args = ap.parse_args()

    print("x\tlog_average\tabs_scale_average\tseconds")
    for x in map(int, args.x):
        t0 = time.perf_counter()
        v = chowla_log_average(x, args.w, args.kind, args.kind).value
        s = scale_average_abs(x, args.w, None, args.kind, args.kind).value if args.abs else float("nan")
        print(f"{x}\t{v:+.6f}\t{s:.6f}\t{time.perf_counter() - t0:.1f}")


if __name__ == "__main__":
    main()
