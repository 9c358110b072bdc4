"""Command line front end: ``cspspin <subcommand> [options]``.

Every output carries a manifest (subcommand, parameters, seed, version). CSV
output puts it on a leading ``# manifest:`` line; JSON output nests it. Equal
manifests give byte-identical output.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings

import numpy as np

from . import __version__
from .ensembles import ResourceError
from .experiments import (
    chi_experiment,
    default_search_options,
    interpolation_experiment,
    ogp_experiment,
    poisson_exact_experiment,
    table1_rows,
    vmax_experiment,
)
from .landscape import ENUMERATION_BITS, AnnealSchedule
from .parisi import minimize_alg, minimize_gsed
from .predicates import FAMILIES, MixturePolynomial, builtin_predicate, load_predicate, mixture, walsh_transform

EXIT_OK, EXIT_VALIDATION, EXIT_RESOURCE = 0, 2, 3


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _predicate(args):
    if args.table:
        return load_predicate(args.table)
    return builtin_predicate(args.family, args.k)


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, (np.floating, np.integer)):
        return _clean(value.item())
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def _manifest(args) -> dict:
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "command")}
    return {"subcommand": args.command, "parameters": _clean(params), "seed": args.seed, "version": __version__}


def _emit(args, result, rows=None):
    """Write ``rows`` as CSV (or ``result`` as JSON) with the manifest attached."""
    manifest = _manifest(args)
    if args.format == "json" or rows is None:
        text = json.dumps({"manifest": manifest, "result": _clean(result)}, indent=2, sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        buf.write("# manifest: " + json.dumps(manifest, sort_keys=True) + "\n")
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]) if rows else [], lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        text = buf.getvalue()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _guard_enumeration(n: int, ell: int = 1):
    if n * ell > ENUMERATION_BITS:
        raise ResourceError(f"exhaustive enumeration needs ell * n <= {ENUMERATION_BITS}, got {ell} * {n}")


# -- subcommands ----------------------------------------------------------------------------


def cmd_spectrum(args):
    p = _predicate(args)
    spec = walsh_transform(p)
    xi = mixture(p)
    levels = spec.level_weights()
    result = {
        "name": p.name,
        "k": p.k,
        "mean_term": spec.mean,
        "level_weights": levels.tolist(),
        "xi": {str(d): c for d, c in enumerate(xi.coefficients, start=1)},
        "xi_text": str(xi),
        "fourier": {",".join(str(i + 1) for i in sorted(S)) or "empty": c for S, c in spec.subsets().items()},
    }
    rows = [{"degree": j, "level_weight": float(w)} for j, w in enumerate(levels)]
    _emit(args, result, rows)


def _xi_from_args(args) -> MixturePolynomial:
    if args.xi:
        terms = {}
        for part in args.xi.split(","):
            deg, coef = part.split(":")
            terms[int(deg)] = float(coef)
        return MixturePolynomial.from_degrees(terms)
    return mixture(_predicate(args))


def cmd_table1(args):
    opts = default_search_options(args.grid_nx, args.grid_L, args.atoms)
    rows = table1_rows(args.families, args.ks, opts)
    _emit(args, rows, rows)


def cmd_gsed(args):
    xi = _xi_from_args(args)
    opts = default_search_options(args.grid_nx, args.grid_L, args.atoms)
    gsed = minimize_gsed(xi, opts)
    result = {"xi": xi.to_json(), "gsed": gsed.to_json()}
    if args.alg:
        result["alg"] = minimize_alg(xi, opts).to_json()
    _emit(args, result)


def cmd_vmax(args):
    _guard_enumeration(args.n)
    p = _predicate(args)
    alpha = args.alpha[0]
    res = vmax_experiment(p, args.n, alpha, args.reps, args.seed)
    rows = [{"rep": r, "value": float(v)} for r, v in enumerate(res.values)]
    rows.append({"rep": "mean", "value": res.mean})
    rows.append({"rep": "stderr", "value": res.stderr})
    _emit(args, {"values": res.values.tolist(), "mean": res.mean, "stderr": res.stderr}, rows)


def cmd_interpolate(args):
    _guard_enumeration(args.n)
    rows = interpolation_experiment(_predicate(args), args.n, args.beta, args.alpha, args.reps, args.seed)
    _emit(args, rows, rows)


def cmd_poisson_gap(args):
    _guard_enumeration(args.n)
    res = poisson_exact_experiment(_predicate(args), args.n, args.alpha[0], args.beta, args.reps, args.seed)
    _emit(args, res, [res])


def cmd_chi(args):
    schedule = AnnealSchedule(sweeps=args.sweeps)
    curve = chi_experiment(_predicate(args), args.n, args.alpha[0], args.t, args.reps, args.seed, schedule)
    rows = curve.rows()
    _emit(args, {"reps": curve.reps, "curve": rows}, rows)


def cmd_ogp(args):
    _guard_enumeration(args.n, 2)
    rows = ogp_experiment(
        _predicate(args), args.n, args.alpha[0], args.t[0], args.thresholds, args.seed, args.bins, args.mode
    )
    _emit(args, rows, rows)


# -- parser ---------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cspspin", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, predicate=True, n=None, alpha=None, reps=None):
        if predicate:
            p.add_argument("--family", choices=FAMILIES, default="kXOR")
            p.add_argument("--k", type=int, default=2)
            p.add_argument("--table", help="JSON predicate file ({'k', 'table'} or {'family', 'k'})")
        if n is not None:
            p.add_argument("--n", type=int, default=n)
        if alpha is not None:
            p.add_argument("--alpha", type=_floats, default=alpha, help="clause density (comma list where allowed)")
        if reps is not None:
            p.add_argument("--reps", type=int, default=reps)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    def grid(p):
        p.add_argument("--grid-nx", type=int, default=1 << 12, help="spatial points of the reporting grid")
        p.add_argument("--grid-L", type=float, default=None, help="grid half-width (default 8 sqrt(xi'(1)))")
        p.add_argument("--atoms", type=int, default=8, help="maximum number of order-parameter pieces")

    p = sub.add_parser("spectrum", help="Fourier spectrum and mixture polynomial of a predicate")
    common(p)
    p.set_defaults(func=cmd_spectrum, format="json")

    p = sub.add_parser("table1", help="ground-state constants for the built-in families")
    common(p, predicate=False)
    p.add_argument("--families", type=lambda s: s.split(","), default=list(FAMILIES))
    p.add_argument("--ks", type=_ints, default=[2, 3, 4, 5])
    grid(p)
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("gsed", help="minimize the Parisi functional for one mixture")
    common(p)
    p.add_argument("--xi", help="mixture as 'degree:coef,...' (coef is c_p^2); overrides the predicate")
    p.add_argument("--alg", action="store_true", help="also minimize over the extended class")
    grid(p)
    p.set_defaults(func=cmd_gsed, format="json")

    p = sub.add_parser("vmax", help="exact optimal values of random instances")
    common(p, n=20, alpha=[64.0], reps=50)
    p.set_defaults(func=cmd_vmax)

    p = sub.add_parser("interpolate", help="CSP vs spin-glass free energies across densities")
    common(p, n=16, alpha=[4.0, 16.0, 64.0], reps=100)
    p.add_argument("--beta", type=float, default=1.0)
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("poisson-gap", help="paired poisson vs exact free-energy difference")
    common(p, n=16, alpha=[8.0], reps=200)
    p.add_argument("--beta", type=float, default=1.0)
    p.set_defaults(func=cmd_poisson_gap)

    p = sub.add_parser("chi", help="correlation curve of the debiased annealer")
    common(p, n=64, alpha=[8.0], reps=200)
    p.add_argument("--t", type=_floats, default=[0.0, 0.25, 0.5, 0.75, 1.0])
    p.add_argument("--sweeps", type=int, default=200)
    p.set_defaults(func=cmd_chi)

    p = sub.add_parser("ogp", help="overlap histogram above value thresholds")
    common(p, n=10, alpha=[8.0])
    p.add_argument("--t", type=_floats, default=[1.0], help="correlation of the instance pair")
    p.add_argument("--thresholds", type=_floats, default=[0.5, 0.55, 0.6])
    p.add_argument("--bins", type=int, default=None)
    p.add_argument("--mode", choices=("average", "plain"), default="average")
    p.set_defaults(func=cmd_ogp)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # optimizer flags are part of the output rows
            args.func(args)
    except ResourceError as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
