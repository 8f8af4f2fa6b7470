"""Paired KAN / Res-KAN training over f_alpha targets; prints test-MSE ratios.

Wraps ``reskan train --alpha-grid ... --residual both`` and reads its summary.
"""

import argparse
import csv
import sys
from pathlib import Path

from reskan.cli import main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alphas", default="1,2,3,4,5,6")
    ap.add_argument("--epochs", type=int, default=1000)
    ap.add_argument("--s", type=int, default=1)
    ap.add_argument("--width", type=int, default=32)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/sweep")
    args = ap.parse_args()

    code = cli([
        "train", "--alpha-grid", args.alphas, "--residual", "both", "--s", str(args.s),
        "--epochs", str(args.epochs), "--width", str(args.width), "--seed", str(args.seed),
        "--mc-samples", "1000", "--out", args.out,
    ])  # fmt: skip
    if code:
        sys.exit(code)
    with open(Path(args.out) / "summary.csv", newline="") as fh:
        rows = {(r["target"], r["residual"]): float(r["test_mse"]) for r in csv.DictReader(fh)}
    print(f"\n{'target':>9} {'Res-KAN':>11} {'KAN':>11} {'ratio':>7}")
    for a in args.alphas.split(","):
        t = f"f_alpha{a}"
        res, kan = rows[(t, "True")], rows[(t, "False")]
        print(f"{t:>9} {res:11.3e} {kan:11.3e} {res / kan:7.3f}")


if __name__ == "__main__":
    main()
