#!/usr/bin/env python3
"""Refinement study on the forced benchmark (manufactured solution).

Example:
    python scripts/run_convergence.py --sizes 32 64 128 256
"""

import argparse

from lrvlasov.driver import convergence_table


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[32, 64, 128, 256])
    ap.add_argument("--eps", type=float, default=1e-4)
    ap.add_argument("--cfl", type=float, default=0.2)
    args = ap.parse_args()

    rows = convergence_table(args.sizes, {"eps": args.eps, "cfl": args.cfl})
    print(f"{'N':>6} {'Linf error':>14} {'order':>7} {'L2 error':>14} {'order':>7}")
    for r in rows:
        o1 = f"{r['order_linf']:7.2f}" if r["order_linf"] == r["order_linf"] else "     --"
        o2 = f"{r['order_l2']:7.2f}" if r["order_l2"] == r["order_l2"] else "     --"
        print(f"{r['n']:>6} {r['linf']:14.4e} {o1} {r['l2']:14.4e} {o2}")


if __name__ == "__main__":
    main()
