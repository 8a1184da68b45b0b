"""Command-line entry point ``pvsubdiv``.

Exit status: 0 success, 1 input error, 2 subdivision did not finish
(depth limit or box budget), 3 an internal invariant failed.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from fractions import Fraction

import numpy as np

from . import amortize
from .condition import kappa_aff, regularity_check, size_bound_from_kappa
from .effective import pv_effective, precision_log
from .interval import BoxBudgetExceeded, DepthExceeded, algorithm_rules, pv_interval, theorem_rules, verify_subdivision
from .output import (dumps_csv, dumps_subdivision, load_subdivision, loglog_svg, precision_log_rows, render_svg)
from .poly import PolynomialError, format_rational, load_poly, save_poly
from .sampling import CLASSES, DobroSpec, child_rngs, default_seed, sample_dobro

EXIT_OK, EXIT_INPUT, EXIT_UNFINISHED, EXIT_INVARIANT = 0, 1, 2, 3


class InputError(Exception):
    pass


class InvariantFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise InputError(message)


def _write(path, text: str):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _rational(s: str) -> Fraction:
    try:
        return Fraction(s.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise InputError(f"not a number: {s!r}") from exc


def _int_range(s: str) -> list[int]:
    try:
        if ":" in s:
            lo, hi = s.split(":")
            return list(range(int(lo), int(hi) + 1))
        return [int(v) for v in s.split(",")]
    except ValueError as exc:
        raise InputError(f"bad range {s!r}") from exc


def _float_list(s: str) -> list[float]:
    try:
        return [float(Fraction(v)) if "/" in v else float(v) for v in s.split(",")]
    except ValueError as exc:
        raise InputError(f"bad list {s!r}") from exc


# ---------------------------------------------------------------------------
# subcommands


def cmd_subdivide(args) -> int:
    f = load_poly(args.poly)
    a = _rational(args.a)
    if args.mode == "effective":
        sub = pv_effective(f, a, args.max_depth, workers=args.workers, max_boxes=args.max_boxes)
        rules = theorem_rules
    else:
        sub = pv_interval(f, a, args.max_depth, workers=args.workers, max_boxes=args.max_boxes)
        rules = algorithm_rules
    if sub.total_volume() != (2 * a) ** f.n:
        raise InvariantFailure("boxes do not tile the region")
    if args.verify and not verify_subdivision(f, sub, rules).all():
        raise InvariantFailure("a box failed exact re-verification")
    _write(args.out, dumps_subdivision(sub, f, args.record_time))
    if args.svg:
        _write(args.svg, render_svg(sub, f if args.curve else None))
    if args.precision_log:
        if args.mode != "effective":
            raise InputError("--precision-log needs --mode effective")
        _write(args.precision_log, dumps_csv(precision_log_rows(precision_log(sub), f.n)))
    if args.out not in (None, "-"):
        print(f"{sub.box_count} boxes, deepest level {sub.max_depth}", file=sys.stderr)
    return EXIT_OK


def _read_points(path, n: int) -> list[list[Fraction]]:
    pts = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#")[0].strip()
            if not line:
                continue
            row = [_rational(v) for v in line.replace(",", " ").split()]
            if len(row) != n:
                raise InputError(f"point {line!r} does not have {n} coordinates")
            pts.append(row)
    return pts


def _grid_points(spec: str, n: int) -> list[list[Fraction]]:
    try:
        lo, hi, k = spec.split(":")
        lo, hi, k = _rational(lo), _rational(hi), int(k)
    except ValueError as exc:
        raise InputError(f"grid spec must be LO:HI:K, got {spec!r}") from exc
    if k < 1:
        raise InputError("grid needs K >= 1")
    axis = [lo] if k == 1 else [lo + (hi - lo) * i / (k - 1) for i in range(k)]
    out = [[]]
    for _ in range(n):
        out = [p + [v] for p in out for v in axis]
    return out


def cmd_condition(args) -> int:
    f = load_poly(args.poly)
    if (args.points is None) == (args.grid is None):
        raise InputError("give exactly one of --points and --grid")
    pts = _read_points(args.points, f.n) if args.points else _grid_points(args.grid, f.n)
    rows = []
    for x in pts:
        kv = kappa_aff(f, x)
        fh, gh, rhs = regularity_check(f, x)
        row = {f"x_{i + 1}": v for i, v in enumerate(x)}
        row.update(
            kappa=kv.kappa,
            b=float(size_bound_from_kappa(kv.kappa, f.d, f.n, 2.5)),
            b_fp=float(size_bound_from_kappa(kv.kappa, f.d, f.n, 6.0)),
            fhat=fh,
            dfhat=gh,
            regularity_rhs=rhs,
            margin=max(fh, gh) - rhs,
        )
        rows.append(row)
    _write(args.out, dumps_csv(rows))
    return EXIT_OK


def _seed(args) -> int:
    return default_seed() if args.seed is None else args.seed


def cmd_sample(args) -> int:
    spec = DobroSpec(args.cls, args.n, args.d, ell=args.ell, seed=_seed(args))
    os.makedirs(args.out, exist_ok=True)
    width = max(4, len(str(args.count - 1)))
    for i, rng in enumerate(child_rngs(spec.seed, args.count)):
        save_poly(sample_dobro(spec, rng), os.path.join(args.out, f"sample_{i:0{width}d}.json"))
    return EXIT_OK


def cmd_experiment(args) -> int:
    seed = _seed(args)
    if args.kind == "avg-boxes":
        degrees = _int_range(args.d_range)
        rows = amortize.avg_boxes(args.cls, args.n, degrees, _rational(args.a), args.trials, seed, args.mode,
                                  args.max_depth, args.workers, args.ell, args.moment_samples)
        _write(args.out, dumps_csv(rows))
        xs = [r["d"] for r in rows]
        ys = [r["mean_boxes"] for r in rows]
        if len(xs) > 1:
            slope, icpt = np.polyfit(np.log(xs), np.log(ys), 1)
            print(f"log-log slope of mean boxes vs d: {slope:.4f}", file=sys.stderr)
            if args.svg:
                _write(args.svg, loglog_svg(xs, ys, float(slope), float(icpt)))
    elif args.kind == "tail":
        spec = DobroSpec(args.cls, args.n, args.d, ell=args.ell, seed=seed)
        x = _float_list(args.x) if args.x else [0.0] * args.n
        if len(x) != args.n:
            raise InputError("--x has the wrong dimension")
        center = load_poly(args.poly) if args.poly else None
        sigma = args.sigma[0] if args.sigma else None
        if (center is None) != (sigma is None):
            raise InputError("the smoothed tail needs both --poly and --sigma")
        rows = amortize.empirical_tail(spec, x, _float_list(args.t), args.trials, seed, center, sigma)
        _write(args.out, dumps_csv([{"t": r.t, "frequency": r.frequency, "stderr": r.stderr, "bound": r.bound,
                                     "exceed": r.exceed, "trials": r.trials} for r in rows]))
    else:
        if not args.poly or not args.sigma:
            raise InputError("smoothed needs --poly and --sigma")
        f = load_poly(args.poly)
        rows = amortize.smoothed_boxes(f, _rational(args.a), args.sigma, args.trials, seed, args.cls,
                                       args.mode, args.max_depth, args.workers)
        _write(args.out, dumps_csv(rows))
        if args.svg and len(rows) > 1:
            xs = [r["sigma"] for r in rows]
            ys = [r["mean_boxes"] for r in rows]
            slope, icpt = np.polyfit(np.log(xs), np.log(ys), 1)
            _write(args.svg, loglog_svg(xs, ys, float(slope), float(icpt), xlabel="sigma"))
    return EXIT_OK


def cmd_render(args) -> int:
    sub, embedded = load_subdivision(args.subdivision)
    f = load_poly(args.poly) if args.poly else embedded
    if sub.n != 2 or (f is not None and f.n != 2):
        raise InputError("render supports n = 2 only")
    _write(args.svg, render_svg(sub, f if args.curve else None))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pvsubdiv", description="Certified subdivision of implicit hypersurfaces f = 0 in [-a, a]^n.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("subdivide", help="subdivide [-a, a]^n until every box is certified")
    s.add_argument("--poly", required=True)
    s.add_argument("--a", required=True, help="half-width of the region (decimal or p/q)")
    s.add_argument("--mode", choices=("interval", "effective"), default="interval")
    s.add_argument("--max-depth", type=int, default=40)
    s.add_argument("--max-boxes", type=int, default=None, help="stop with exit 2 after this many tested boxes")
    s.add_argument("--out", default="-")
    s.add_argument("--svg")
    s.add_argument("--no-curve", dest="curve", action="store_false", help="omit the zero-curve overlay")
    s.add_argument("--precision-log")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--verify", action="store_true", help="re-verify every certificate exactly")
    s.add_argument("--record-time", action="store_true", help="store wall-clock time in the output")
    s.set_defaults(run=cmd_subdivide)

    c = sub.add_parser("condition", help="tabulate kappa_aff and local size bounds")
    c.add_argument("--poly", required=True)
    c.add_argument("--points")
    c.add_argument("--grid", help="LO:HI:K, K points per axis")
    c.add_argument("--out", default="-")
    c.set_defaults(run=cmd_condition)

    r = sub.add_parser("sample", help="draw random polynomials")
    r.add_argument("--class", dest="cls", choices=CLASSES, default="kss")
    r.add_argument("--ell", type=float, default=2.0)
    r.add_argument("--n", type=int, required=True)
    r.add_argument("--d", type=int, required=True)
    r.add_argument("--count", type=int, default=1)
    r.add_argument("--seed", type=int)
    r.add_argument("--out", required=True, help="output directory")
    r.set_defaults(run=cmd_sample)

    e = sub.add_parser("experiment", help="Monte-Carlo experiments")
    e.add_argument("kind", choices=("avg-boxes", "tail", "smoothed"))
    e.add_argument("--class", dest="cls", choices=CLASSES, default="kss")
    e.add_argument("--ell", type=float, default=2.0)
    e.add_argument("--n", type=int, default=2)
    e.add_argument("--d", type=int, default=3)
    e.add_argument("--d-range", default="3:8")
    e.add_argument("--a", default="1")
    e.add_argument("--mode", choices=("interval", "effective"), default="interval")
    e.add_argument("--max-depth", type=int, default=40)
    e.add_argument("--trials", type=int, default=100)
    e.add_argument("--moment-samples", type=int, default=1000)
    e.add_argument("--x", help="point for the tail experiment, comma separated")
    e.add_argument("--t", default="2.718281828459045,10,100")
    e.add_argument("--sigma", type=_float_list)
    e.add_argument("--poly", help="center polynomial for smoothed experiments")
    e.add_argument("--seed", type=int)
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--out", default="-")
    e.add_argument("--svg")
    e.set_defaults(run=cmd_experiment)

    v = sub.add_parser("render", help="draw a 2-D subdivision file as SVG")
    v.add_argument("--subdivision", required=True)
    v.add_argument("--poly")
    v.add_argument("--svg", required=True)
    v.add_argument("--no-curve", dest="curve", action="store_false")
    v.set_defaults(run=cmd_render)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "workers", 1) < 1:
            raise InputError("--workers must be >= 1")
        return args.run(args)
    except (DepthExceeded, BoxBudgetExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNFINISHED
    except InvariantFailure as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (InputError, PolynomialError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
