"""Measured B^alpha error of truncated spline networks against the truncation level K.

    python3 scripts/approximation_rate.py --alpha 1 --s 2.5 --levels 1 2 3 4 5
"""

import argparse

import numpy as np

from reskan.cli import approximate, resolve_target


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--target", default="f_alpha3")
    ap.add_argument("--alpha", type=float, default=1.0)
    ap.add_argument("--s", type=float, default=2.5)
    ap.add_argument("--order", type=int, default=None)
    ap.add_argument("--levels", type=int, nargs="+", default=[1, 2, 3, 4, 5])
    args = ap.parse_args()

    # eps just above the threshold of level K selects exactly K
    eps = [2.0 ** ((args.alpha - args.s) * (K + 0.9)) for K in args.levels]
    rows = approximate(resolve_target(args.target), eps, args.alpha, args.s, args.order)
    print(f"{'K':>3} {'predicted':>12} {'measured':>12} {'nonzero':>8}")
    for r in rows:
        print(f"{r.K:>3} {r.predicted_error:12.4e} {r.measured_error:12.4e} {r.nonzero:>8}")
    Ks = np.array([r.K for r in rows])
    slope = np.polynomial.Polynomial.fit(Ks, np.log2([r.measured_error for r in rows]), 1).convert().coef[1]
    print(f"log2 slope {slope:.3f}, predicted {args.alpha - args.s:.3f}")


if __name__ == "__main__":
    main()
