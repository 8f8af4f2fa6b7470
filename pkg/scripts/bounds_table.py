"""Sample-complexity and certificate grid over (eps, delta) at the default constants."""

import argparse

from reskan.bounds import BoundConfig, generalization_certificate, sample_complexity


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--L", type=int, default=2)
    ap.add_argument("--W", type=int, default=32)
    ap.add_argument("--order", type=int, default=3)
    ap.add_argument("--alpha", type=float, default=2.0)
    ap.add_argument("--d", type=int, default=1)
    ap.add_argument("--c", type=float, default=1.0)
    args = ap.parse_args()

    cfg = BoundConfig(c=args.c)
    arch = (args.L, args.W, args.order, args.alpha, args.d)
    print(f"{'eps':>6} {'delta':>8} {'N*':>12} {'certificate':>12}")
    for eps in (0.5, 0.2, 0.1, 0.05):
        for delta in (0.1, 0.01, 1e-4):
            N = sample_complexity(eps, delta, *arch, cfg)
            cert = generalization_certificate(N, eps, *arch, cfg)
            print(f"{eps:6.2f} {delta:8.0e} {N:12.4e} {cert:12.3e}")


if __name__ == "__main__":
    main()
