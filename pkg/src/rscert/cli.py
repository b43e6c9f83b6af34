"""Command-line front end.

Exit codes: 0 success, 1 invalid flags or arguments, 2 unsupported
(family, adversary) pair.  JSON output is one object per line; CSV output has
a header row and 17 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import harness, levelset
from .noise import NoiseSpec, UnsupportedOperation, sample, sigma_for_lambda, spec_for_sigma
from .radius import Adversary, UnsupportedPair, certified_radius

EXIT_OK, EXIT_USAGE, EXIT_UNSUPPORTED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _g(x: float) -> str:
    return format(float(x), ".17g")


def _floats(text: str, name: str) -> list:
    items = [t for t in text.split(",") if t.strip()]
    if not items:
        raise UsageError(f"--{name} needs at least one value")
    try:
        return [float(t) for t in items]
    except ValueError:
        raise UsageError(f"--{name} must be a comma-separated list of numbers") from None


def _add_noise(p: argparse.ArgumentParser, *, sigma_list: bool = False):
    p.add_argument("--dist", required=True, help="noise family, e.g. gaussian, exp_l2, power_linf")
    p.add_argument("--k", type=float)
    p.add_argument("--j", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--dim", type=int, required=True)
    if sigma_list:
        p.add_argument("--sigma", required=True, help="comma-separated sigma grid")
    else:
        p.add_argument("--lambda", dest="lam", type=float)
        p.add_argument("--sigma", type=float)


def _params(args) -> dict:
    return {n: getattr(args, n) for n in ("k", "j", "a", "p") if getattr(args, n) is not None}


def _spec(args) -> NoiseSpec:
    if args.lam is not None and args.sigma is not None:
        raise UsageError("give either --lambda or --sigma, not both")
    if args.lam is None and args.sigma is None:
        raise UsageError("one of --lambda or --sigma is required")
    if args.sigma is not None:
        return spec_for_sigma(args.dist, args.dim, args.sigma, **_params(args))
    return NoiseSpec(args.dist, args.lam, args.dim, **_params(args))


def _emit(out, text: str):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --- commands ----------------------------------------------------------------

def cmd_certify(args) -> int:
    spec = _spec(args)
    res = certified_radius(spec, args.adv, args.rho)
    print(json.dumps(res.to_dict()))
    return EXIT_OK


def cmd_table(args) -> int:
    spec = _spec(args)
    radii = None if args.radii is None else _floats(args.radii, "radii")
    if spec.family not in levelset.LEVEL_SET_FAMILIES:
        raise UnsupportedPair(spec.family, "l2", ["level-set tables cover " + ", ".join(levelset.LEVEL_SET_FAMILIES)])
    table = levelset.build_table(spec, radii)
    _emit(args.out, table.to_csv())
    return EXIT_OK


def cmd_lookup(args) -> int:
    with open(args.table) as fh:
        table = levelset.RadiusTable.from_csv(fh.read())
    for rho in _floats(args.rho, "rho"):
        print(json.dumps(levelset.lookup(table, rho).to_dict()))
    return EXIT_OK


def cmd_sweep(args) -> int:
    families = [f for f in args.dist.split(",") if f]
    sigmas = _floats(args.sigma, "sigma")
    rhos = _floats(args.rho, "rho")
    rows = []
    for fam in families:
        for rho in rhos:
            block = []
            for sigma in sigmas:
                spec = spec_for_sigma(fam, args.dim, sigma, **_params(args))
                block.append([spec_label(spec), sigma, spec.lam, rho,
                              certified_radius(spec, args.adv, rho).value])
            env = max(r[-1] for r in block)
            rows += [r + [env] for r in block]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["distribution", "sigma", "lambda", "rho", "radius", "envelope"])
    for name, sigma, lam, rho, rad, env in rows:
        w.writerow([name, _g(sigma), _g(lam), _g(rho), _g(rad), _g(env)])
    _emit(args.out, buf.getvalue())
    return EXIT_OK


def spec_label(spec: NoiseSpec) -> str:
    """Family name with its shape parameters, e.g. ``exp_linf(k=2,j=0)``."""
    if not spec.params:
        return spec.family
    inner = ",".join(f"{n}={v:g}" for n, v in spec.params.items())
    return f"{spec.family}({inner})"


def cmd_simulate(args) -> int:
    spec = _spec(args)
    if args.n < 1 or args.repeats < 1:
        raise UsageError("--n and --repeats must be positive")
    clf = harness.ClassifierSpec.halfspace(0, 0.0, 1)
    x = np.zeros(spec.dim)
    x[0] = args.margin
    table = None
    if args.table:
        with open(args.table) as fh:
            table = levelset.RadiusTable.from_csv(fh.read(), spec)
    lines = []
    for i in range(args.repeats):
        res = harness.certify_mc(clf, spec, x, args.adv, args.n, args.alpha,
                                 seed=args.seed + i, threads=args.threads, table=table)
        lines.append(res.to_json() + "\n")
    _emit(args.out, "".join(lines))
    return EXIT_OK


def cmd_sample(args) -> int:
    spec = _spec(args)
    if args.n < 1:
        raise UsageError("--n must be positive")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(args.seed)))
    data = sample(spec, rng, args.n)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow([f"x{i}" for i in range(spec.dim)])
    for row in data:
        w.writerow([_g(v) for v in row])
    _emit(args.out, buf.getvalue())
    return EXIT_OK


def cmd_convert(args) -> int:
    spec = _spec(args)
    out = {"family": spec.family, "dim": spec.dim, **spec.params,
           "lambda": spec.lam, "sigma": sigma_for_lambda(spec)}
    print(json.dumps(out))
    return EXIT_OK


# --- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rscert", description="Certified radii for randomized smoothing.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("certify", help="certified radius for one (noise, adversary, rho)")
    _add_noise(p)
    p.add_argument("--adv", required=True, choices=[a.value for a in Adversary])
    p.add_argument("--rho", type=float, required=True)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("table", help="level-set radius table (CSV) for a spherical family")
    _add_noise(p)
    p.add_argument("--radii", help="comma-separated radii in the units of x (default: log grid)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("lookup", help="look up certified radii in a table file")
    p.add_argument("--table", required=True)
    p.add_argument("--rho", required=True, help="comma-separated probabilities")
    p.set_defaults(func=cmd_lookup)

    p = sub.add_parser("sweep", help="radius grid over families, sigmas and rhos (CSV)")
    _add_noise(p, sigma_list=True)
    p.add_argument("--adv", required=True, choices=[a.value for a in Adversary])
    p.add_argument("--rho", required=True, help="comma-separated probabilities")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="Monte-Carlo certification of a halfspace classifier")
    _add_noise(p)
    p.add_argument("--adv", required=True, choices=[a.value for a in Adversary])
    p.add_argument("--margin", type=float, default=1.0, help="distance of x from the boundary along axis 0")
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--alpha", type=float, default=0.001)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--table", help="level-set table CSV for pairs without a closed form")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sample", help="draw noise vectors (CSV)")
    _add_noise(p)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("convert", help="convert between lambda and sigma")
    _add_noise(p)
    p.set_defaults(func=cmd_convert)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"rscert: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UnsupportedPair as exc:
        print(f"rscert: unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except UnsupportedOperation as exc:
        print(f"rscert: unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (ValueError, OSError) as exc:
        print(f"rscert: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
