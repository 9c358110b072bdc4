"""Correlation curve of the debiased annealer on t-correlated instance pairs."""

import argparse

import numpy as np

from cspspin.experiments import chi_experiment
from cspspin.landscape import AnnealSchedule
from cspspin.predicates import FAMILIES, builtin_predicate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--family", default="kXOR", choices=FAMILIES)
    ap.add_argument("--k", type=int, default=2)
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--alpha", type=float, default=8.0)
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--points", type=int, default=9, help="number of t values in [0, 1]")
    ap.add_argument("--sweeps", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    ts = np.linspace(0.0, 1.0, args.points)
    curve = chi_experiment(builtin_predicate(args.family, args.k), args.n, args.alpha, ts, args.reps,
                           args.seed, AnnealSchedule(sweeps=args.sweeps))
    for row in curve.rows():
        print(f"t={row['t']:.3f}  chi={row['estimate']:+.4f}  se={row['stderr']:.4f}")


if __name__ == "__main__":
    main()
