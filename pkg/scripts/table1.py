"""Ground-state constants for the built-in predicate families, printed as a grid."""

import argparse
import time

from cspspin.experiments import default_search_options, table1_rows
from cspspin.predicates import FAMILIES


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ks", type=int, nargs="+", default=[2, 3, 4, 5])
    ap.add_argument("--families", nargs="+", default=list(FAMILIES), choices=FAMILIES)
    ap.add_argument("--points", type=int, default=4096)
    ap.add_argument("--atoms", type=int, default=8)
    args = ap.parse_args()

    opts = default_search_options(args.points, None, args.atoms)
    print(f"{'k':>2} " + " ".join(f"{f:>22}" for f in args.families))
    for k in args.ks:
        cells = []
        for fam in args.families:
            start = time.perf_counter()
            (row,) = table1_rows([fam], [k], opts)
            cells.append(f"{row['mean_term']:.5f} + {row['gsed']:.4f}/sqrt(a)"
                         if not row["error"] else "error")
            print(f"  {fam} k={k} done in {time.perf_counter() - start:.0f}s", flush=True)
        print(f"{k:>2} " + " ".join(f"{c:>22}" for c in cells), flush=True)


if __name__ == "__main__":
    main()
