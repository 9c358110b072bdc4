"""Compare the monotone and unconstrained Parisi minima for pure p-spin mixtures."""

import argparse

from cspspin.parisi import OptimizerOptions, ParisiGrid, minimize_alg, minimize_gsed
from cspspin.predicates import MixturePolynomial


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--degrees", type=int, nargs="+", default=[2, 3, 4])
    ap.add_argument("--weight", type=float, default=0.25, help="coefficient c_p^2 of s^p")
    ap.add_argument("--points", type=int, default=4096)
    ap.add_argument("--atoms", type=int, default=8)
    args = ap.parse_args()

    opts = OptimizerOptions(max_atoms=args.atoms, report_grid=ParisiGrid(points=args.points))
    print(f"{'p':>2} {'gsed':>9} {'alg':>9} {'gap':>8} {'grid delta':>11}")
    for p in args.degrees:
        xi = MixturePolynomial.from_degrees({p: args.weight})
        g, a = minimize_gsed(xi, opts), minimize_alg(xi, opts)
        print(f"{p:>2} {g.value:9.5f} {a.value:9.5f} {g.value - a.value:8.4f} "
              f"{max(g.grid_delta, a.grid_delta):11.2e}", flush=True)


if __name__ == "__main__":
    main()
