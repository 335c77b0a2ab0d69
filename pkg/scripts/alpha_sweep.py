"""Case A reconstruction error as a function of the fractional order alpha.

Usage: python scripts/alpha_sweep.py [--alphas 0.3 0.5 0.7] [--out results/alpha]
"""
import argparse
from pathlib import Path

from fracwest.experiments import ExperimentConfig, alpha_sensitivity


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--alphas", nargs="+", type=float, default=[0.3, 0.5, 0.7])
    p.add_argument("--noise", type=float, default=0.001)
    p.add_argument("--out", default="results/alpha")
    args = p.parse_args()
    rows = alpha_sensitivity(ExperimentConfig(noise_rel=args.noise), args.alphas, Path(args.out))
    print(f"{'alpha':>6} {'iters':>5} {'kappa[0.3,1]':>12} {'slowness':>9}")
    for a, n, ek, es in rows:
        print(f"{a:6.2f} {n:5d} {ek:12.4f} {es:9.4f}")


if __name__ == "__main__":
    main()
