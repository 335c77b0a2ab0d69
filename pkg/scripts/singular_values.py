"""Dump the frozen-Jacobian singular values and the log-linear decay fit.

Usage: python scripts/singular_values.py [--out results/svd] [--n-cells 200 --n-steps 1000]
"""
import argparse
from pathlib import Path

from fracwest.experiments import ExperimentConfig, dump_singular_values, loglinear_r2


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="results/svd")
    p.add_argument("--case", default="A")
    p.add_argument("--n-cells", type=int, default=200)
    p.add_argument("--n-steps", type=int, default=1000)
    args = p.parse_args()
    cfg = ExperimentConfig(case=args.case, n_cells=args.n_cells, n_steps=args.n_steps)
    s = dump_singular_values(cfg, Path(args.out)).singular_values
    print(f"R2 of log-linear fit over top 30: {loglinear_r2(s, 30):.4f}")
    print(f"sigma_10 / sigma_1: {s[9] / s[0]:.3e}")
    for j in range(min(15, s.size)):
        print(f"{j + 1:3d} {s[j] / s[0]:.3e}")


if __name__ == "__main__":
    main()
