"""Command line: ``ncgauss verify | diagram | transfer | gkw``.

Exit codes: 0 all checks pass, 1 some check failed, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .bratteli import MAIN, diagram_to_dot, diagram_to_json
from .gauss_nc import quotient_diagram
from .report import SUITES, ConfigError, RunConfig, build_report, report_to_csv, report_to_json, run_suites
from .transfer import gkw_estimate, samples_to_csv, stable_digits, transfer_samples

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

NAMED_FUNCTIONS = {
    "one": lambda t: np.ones_like(np.asarray(t, dtype=float)),
    "id": lambda t: np.asarray(t, dtype=float),
    "square": lambda t: np.asarray(t, dtype=float) ** 2,
    "cos": lambda t: np.cos(np.asarray(t, dtype=float)),
}


def parse_function(text: str):
    """A named function, or ``poly:c0,c1,...`` for sum c_i theta**i."""
    if text in NAMED_FUNCTIONS:
        return NAMED_FUNCTIONS[text]
    if text.startswith("poly:"):
        try:
            coeffs = [float(c) for c in text[5:].split(",") if c.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad polynomial coefficients in {text!r}") from exc
        if not coeffs:
            raise ConfigError("a polynomial needs at least one coefficient")
        return lambda t: np.polynomial.polynomial.polyval(np.asarray(t, dtype=float), coeffs)
    raise ConfigError(f"unknown function {text!r}; use one of {sorted(NAMED_FUNCTIONS)} or poly:c0,c1,...")


def _write(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def cmd_verify(args) -> int:
    suites = tuple(SUITES) if not args.suite else tuple(dict.fromkeys(s for group in args.suite for s in group.split(",")))
    cfg = RunConfig(
        level=args.level,
        smax=args.smax,
        truncation=args.truncation,
        seed=args.seed,
        tol=args.tol,
        suites=suites,
    )
    results = run_suites(cfg)
    report = build_report(cfg, results, timestamps=not args.no_timestamp)
    _write(report_to_csv(report) if args.format == "csv" else report_to_json(report), args.out)
    if not args.quiet:
        s = report["summary"]
        print(f"{s['pass']} passed, {s['fail']} failed, {s['skipped']} skipped", file=sys.stderr)
        for r in results:
            if r.status == "fail":
                print(r.line(), file=sys.stderr)
    return EXIT_OK if report["summary"]["ok"] else EXIT_FAIL


def cmd_diagram(args) -> int:
    if args.levels < 1:
        raise ConfigError("levels must be >= 1")
    diagram = MAIN if args.which == "main" else quotient_diagram(args.s)
    text = diagram_to_dot(diagram, args.levels) if args.format == "dot" else diagram_to_json(diagram, args.levels)
    _write(text, args.out)
    return EXIT_OK


def cmd_transfer(args) -> int:
    if args.truncation < 1 or args.samples < 2:
        raise ConfigError("need truncation >= 1 and samples >= 2")
    rows = transfer_samples(parse_function(args.fn), args.truncation, args.samples)
    _write(samples_to_csv(rows), args.out)
    return EXIT_OK


def cmd_gkw(args) -> int:
    if args.grid < 50:
        raise ConfigError("grid must be >= 50")
    grids = []
    n = args.grid
    while n >= 50 and len(grids) < args.history:
        grids.append(n)
        n //= 2
    history = [gkw_estimate(g) for g in reversed(grids)]
    best = history[-1]
    out = {
        "grid": best.grid,
        "leading": best.leading.real,
        "subleading": best.subleading.real,
        "modulus": best.modulus,
        "density_error": best.density_error,
        "stable_digits": stable_digits(history),
        "history": [{"grid": h.grid, "modulus": h.modulus, "subleading": h.subleading.real} for h in history],
    }
    _write(json.dumps(out, indent=1, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ncgauss", description="Checks for the noncommutative Gauss map on the Farey AF algebra.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run verification suites and write a report")
    v.add_argument("--suite", action="append", help=f"suite(s) to run, comma separated; default all of {','.join(SUITES)}")
    v.add_argument("--level", type=int, default=8, help="maximum AF level for random checks")
    v.add_argument("--smax", type=int, default=4, help="largest branch index s")
    v.add_argument("--truncation", type=int, default=4, help="branch truncation S of the noncommutative Gauss map")
    v.add_argument("--tol", type=float, default=None, help="override every tolerance")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", default=None, help="report path (default stdout)")
    v.add_argument("--format", choices=("json", "csv"), default="json")
    v.add_argument("--no-timestamp", action="store_true", help="omit wall times and generation time")
    v.add_argument("--quiet", action="store_true")
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("diagram", help="export a Bratteli diagram")
    d.add_argument("--levels", type=int, default=3, help="number of rows, starting at level 0")
    d.add_argument("--which", choices=("main", "quotient"), default="main")
    d.add_argument("--s", type=int, default=2, help="branch of the quotient diagram")
    d.add_argument("--format", choices=("dot", "json"), default="dot")
    d.add_argument("--out", default=None)
    d.set_defaults(func=cmd_diagram)

    t = sub.add_parser("transfer", help="sample the truncated transfer operator as CSV")
    t.add_argument("--fn", default="one", help="one, id, square, cos or poly:c0,c1,...")
    t.add_argument("--truncation", type=int, default=100)
    t.add_argument("--samples", type=int, default=11)
    t.add_argument("--out", default=None)
    t.set_defaults(func=cmd_transfer)

    g = sub.add_parser("gkw", help="estimate the subleading transfer eigenvalue")
    g.add_argument("--grid", type=int, default=2000)
    g.add_argument("--history", type=int, default=4, help="number of grids in the halving sequence")
    g.add_argument("--out", default=None)
    g.set_defaults(func=cmd_gkw)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
