"""Command-line entry point: ``hubbard-hf <command> ...``.

Exit status is 0 on success, 1 when any scan row (or self-test) fails and
2 on configuration or usage errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .bounds import BoundConstants, assemble_report, bootstrap_A
from .config import ConfigError, load_config
from .harness import WORKERS_ENV, emit, fit_scaling, read_csv, rows_to_csv, run_scan
from .lattice import KINDS, build_lattice, dimer
from .multiband import reduction_check
from .spectrum import dos_histogram, spectrum_table

EXIT_OK, EXIT_ROW_ERROR, EXIT_CONFIG = 0, 1, 2


def _cmd_scan(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rows, timings = run_scan(cfg, args.workers)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    wrote = False
    for fmt in ("csv", "json"):
        target = getattr(args, fmt) or getattr(cfg, fmt)
        if target:
            emit(rows, target, fmt, cfg, timings)
            wrote = True
    if not wrote:
        sys.stdout.write(rows_to_csv(rows))
    failed = [r for r in rows if r.error]
    for r in failed:
        print(f"row error {r.lattice} L={r.L} N={r.N} U={r.U:g}: {r.error}", file=sys.stderr)
    print(f"{len(rows)} rows, {len(failed)} errors, {sum(timings):.2f} s", file=sys.stderr)
    return EXIT_ROW_ERROR if failed else EXIT_OK


def _cmd_dos(args) -> int:
    lattice = build_lattice(args.lattice, args.L)
    curve = dos_histogram(spectrum_table(lattice), bins=args.bins,
                          normalization=args.normalization)
    curve.to_csv(sys.stdout)
    return EXIT_OK


def _cmd_bound(args) -> int:
    constants = BoundConstants(args.c1, args.c2, args.c3, args.c_lemma3, args.c_eps)
    report = assemble_report(build_lattice(args.lattice, args.L), args.N, args.U, constants,
                             refine=args.refine)
    print(report.to_json())
    return EXIT_OK


def _cmd_fit(args) -> int:
    rows = read_csv(Path(args.csv))
    slope, intercept, r2 = fit_scaling(rows, args.x, args.y)
    print(json.dumps({"x": args.x, "y": args.y, "slope": slope, "intercept": intercept,
                      "r2": r2}))
    return EXIT_OK


def _selftest_checks():
    from .fockspace import ExactDiagonalization
    from .multiband import ModelSpec

    def dimer_oracle():
        worst = 0.0
        for U in (0.0, 1.0, 4.0, 10.0):
            e = ExactDiagonalization(ModelSpec("single", U)).fit(dimer(), 2, (1, 1)).energy_
            worst = max(worst, abs(e - (U - math.sqrt(U * U + 16)) / 2))
        return worst < 1e-10, f"max deviation {worst:.2e}"

    def sum_rule():
        worst = 0.0
        for kind in KINDS:
            for L in (1, 2):
                total = spectrum_table(build_lattice(kind, L)).total_weight("bz")
                d = KINDS[kind][0]
                worst = max(worst, abs(total / (2 * math.pi) ** d - 1))
        return worst < 1e-12, f"max relative deviation {worst:.2e}"

    def reduction():
        report = reduction_check(build_lattice("sc1d", 1), 2, 1.5)
        return True, f"max deviation {max(report['max_deviation'].values()):.2e}"

    def bootstrap():
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(200):
            U, n, eps, I = rng.uniform(0.01, 5, 4)
            A = bootstrap_A(U, n, eps, I)
            rhs = U * math.sqrt(n) / eps * A + I
            worst = max(worst, abs(A * A - rhs) / rhs)
        return worst < 1e-9, f"max relative residual {worst:.2e}"

    return {"dimer": dimer_oracle, "dos-sum-rule": sum_rule, "su2-reduction": reduction,
            "bootstrap": bootstrap}


def _cmd_selftest(args) -> int:
    failures = 0
    for name, check in _selftest_checks().items():
        try:
            ok, detail = check()
        except Exception as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        failures += not ok
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_ROW_ERROR if failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hubbard-hf", description=__doc__.splitlines()[0],
                                     epilog=f"Worker processes for scans: ${WORKERS_ENV}.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="run a parameter scan from a TOML config")
    p.add_argument("config")
    p.add_argument("--csv", help="override the CSV output path")
    p.add_argument("--json", help="override the JSON output path")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_cmd_scan)

    p = sub.add_parser("dos", help="histogram density of states as CSV")
    p.add_argument("lattice", choices=sorted(KINDS))
    p.add_argument("L", type=int)
    p.add_argument("--bins", type=int, default=64)
    p.add_argument("--normalization", choices=("bz", "unit", "states"), default="bz")
    p.set_defaults(func=_cmd_dos)

    p = sub.add_parser("bound", help="bound report for one instance as JSON")
    p.add_argument("lattice", choices=sorted(KINDS))
    p.add_argument("L", type=int)
    p.add_argument("N", type=int)
    p.add_argument("U", type=float)
    p.add_argument("--refine", action="store_true", help="grid-search the window width")
    for name in ("c1", "c2", "c3", "c_lemma3", "c_eps"):
        p.add_argument(f"--{name}", type=float, default=1.0)
    p.set_defaults(func=_cmd_bound)

    p = sub.add_parser("fit", help="log-log slope of one CSV column against another")
    p.add_argument("csv")
    p.add_argument("--x", default="U")
    p.add_argument("--y", default="dE_per_site")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("selftest", help="fast internal consistency checks")
    p.set_defaults(func=_cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
