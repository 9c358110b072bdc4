"""Distance between the CSP free energy and its spin-glass counterpart as the density grows."""

import argparse

from cspspin.experiments import interpolation_experiment
from cspspin.predicates import FAMILIES, builtin_predicate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--family", default="kXOR", choices=FAMILIES)
    ap.add_argument("--k", type=int, default=2)
    ap.add_argument("--n", type=int, default=16)
    ap.add_argument("--beta", type=float, default=1.0)
    ap.add_argument("--alphas", type=float, nargs="+", default=[2.0, 4.0, 8.0, 16.0, 32.0, 64.0])
    ap.add_argument("--reps", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rows = interpolation_experiment(builtin_predicate(args.family, args.k), args.n, args.beta,
                                    args.alphas, args.reps, args.seed)
    print(f"{'alpha':>7} {'phi_csp':>9} {'phi_sg':>9} {'delta':>8} {'se':>7}")
    for r in rows:
        print(f"{r['alpha']:7g} {r['phi_csp']:9.5f} {r['phi_sg_scaled']:9.5f} {r['delta']:8.5f} {r['delta_se']:7.5f}")


if __name__ == "__main__":
    main()
