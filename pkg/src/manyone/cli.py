"""Command-line front end: ``manyone <command> ...``.

Exit status is 0 on success, 1 when a check finds an invariant violated,
and 2 on usage or config errors.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import __version__
from .bounds import dof_sweep, gap_report, gap_scan, geometric_powers
from .core import ValidationError
from .io import (
    LAYER_CSV_COLUMNS,
    SWEEP_COLUMNS,
    ParseError,
    dumps_report,
    manifest,
    parse_config,
    write_csv,
)
from .lattice import DEFAULT_MAX_STATES, NestedLatticePair, StateSpaceTooLarge, exact_leakage, grid_dithers
from .layering import build_plan, check_alignment
from .simulator import CodebookTooLarge, DEFAULT_MARGIN, end_to_end_report

DEFAULT_SEED = 20090628
LEAK_TOL = 1e-12


def _emit(text: str, out=None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_bounds(args) -> int:
    config = parse_config(args.config)
    report = gap_report(config)
    payload = {"config": config.to_dict(), **report.to_dict()}
    _emit(dumps_report(payload, manifest("bounds", config, timestamp=args.timestamp)), args.out)
    ok = report.lower <= report.upper + 1e-9 and report.within_budget
    return 0 if ok else 1


def layer_table(plan) -> str:
    header = ["layer", "interval"] + [f"P_{k},m" for k in range(1, plan.K + 1)]
    rows = []
    for layer in plan.intervals:
        span = "(-inf, 1]" if layer.is_sentinel else f"[{layer.floor:g}, {layer.ceiling:g}]"
        rows.append([str(layer.index), span] + [f"{v:.6g}" for v in plan.alloc[:, layer.index]])
    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(header)]
    lines = ["  ".join(h.rjust(w) for h, w in zip(header, widths))]
    lines += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows]
    return "q = [" + ", ".join(f"{v:g}" for v in plan.q) + "]\n" + "\n".join(lines)


def cmd_layers(args) -> int:
    config = parse_config(args.config)
    plan = build_plan(config)
    report = check_alignment(plan)
    payload = {**plan.to_dict(), "aligned": report.aligned, "feasible": report.feasible}
    text = dumps_report(payload, manifest("layers", config, timestamp=args.timestamp))
    if not args.json:
        text = layer_table(plan) + "\n" + text
    _emit(text, args.out)
    return 0 if report.ok else 1


def cmd_sweep(args) -> int:
    base = parse_config(args.config)
    powers = geometric_powers(args.lo_exp, args.hi_exp, args.points)
    est = dof_sweep(base, powers)
    rows = [
        (p, 0.5 * math.log2(p), max(0.0, lo), up, up - lo)
        for p, lo, up in zip(est.powers, est.lower, est.upper)
    ]
    text = write_csv(rows, SWEEP_COLUMNS, args.out)
    if not args.out:
        sys.stdout.write(text)
    print(f"# slope lower={est.lower_slope:.6f} upper={est.upper_slope:.6f} "
          f"(fit on {est.fit_points} points; K-1={base.K - 1})", file=sys.stderr)
    return 0


def cmd_gap_scan(args) -> int:
    scan = gap_scan(args.case, args.trials, args.seed, args.K)
    payload = scan.to_dict()
    _emit(dumps_report(payload, manifest("gap-scan", seed=args.seed, timestamp=args.timestamp)), args.out)
    return 0 if scan.violations == 0 else 1


def cmd_leakage(args) -> int:
    pair = NestedLatticePair(args.N, args.q)
    rng = np.random.default_rng(args.seed)
    dithers = grid_dithers(pair, args.K, args.dither_grid, rng)
    result = exact_leakage(pair, args.K, dithers, args.dither_grid, args.max_states)
    payload = {"q": args.q, "N": args.N, "K": args.K, "dither_grid": args.dither_grid,
               "dithers": dithers.tolist(), **result.to_dict()}
    _emit(dumps_report(payload, manifest("leakage", seed=args.seed, timestamp=args.timestamp)), args.out)
    ok = (result.leakage_bits <= result.bound_bits + LEAK_TOL
          and abs(result.mod_sum_leakage_bits) <= LEAK_TOL
          and result.T_max <= args.K**args.N)
    return 0 if ok else 1


def cmd_simulate(args) -> int:
    config = parse_config(args.config)
    result = end_to_end_report(config, args.margin, args.trials, args.seed, args.shards,
                               args.N, args.noise_variance)
    text = dumps_report(result.to_dict(), manifest("simulate", config, args.seed, args.timestamp))
    _emit(text, args.out)
    if args.csv:
        write_csv(result.layer_rows(), LAYER_CSV_COLUMNS, args.csv)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="manyone",
        description="Secrecy bounds and layered lattice coding for the many-to-one interference channel.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def common(p, config=True):
        if config:
            p.add_argument("-c", "--config", required=True, help="config JSON file or inline JSON text")
        p.add_argument("-o", "--out", help="write the report here instead of stdout")
        p.add_argument("--timestamp", action="store_true", help="stamp the manifest with the wall clock")

    p = sub.add_parser("bounds", help="lower/upper bounds and gap for one config")
    common(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("layers", help="layer delimiters and power allocation")
    common(p)
    p.add_argument("--json", action="store_true", help="JSON only, no table")
    p.set_defaults(func=cmd_layers)

    p = sub.add_parser("sweep", help="bounds along P_i = P, as CSV")
    p.add_argument("-c", "--config", required=True, help="base config (gains are kept, powers replaced)")
    p.add_argument("-o", "--out", help="CSV path (default stdout)")
    p.add_argument("--lo-exp", type=float, default=10.0, help="smallest power is 2**lo_exp")
    p.add_argument("--hi-exp", type=float, default=40.0, help="largest power is 2**hi_exp")
    p.add_argument("--points", type=int, default=31)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gap-scan", help="worst constant-gap excess over random configs")
    common(p, config=False)
    p.add_argument("--case", type=int, choices=(1, 2), required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--K", type=int, default=3)
    p.set_defaults(func=cmd_gap_scan)

    p = sub.add_parser("leakage", help="exact leakage on an integer nested lattice pair")
    common(p, config=False)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--dither-grid", type=int, default=1, help="dithers lie on the 1/D grid")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--max-states", type=int, default=DEFAULT_MAX_STATES)
    p.set_defaults(func=cmd_leakage)

    p = sub.add_parser("simulate", help="Monte Carlo sequential decoding of the layered scheme")
    common(p)
    p.add_argument("--margin", type=float, default=DEFAULT_MARGIN, help="bits below each rate cap")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--shards", type=int, default=1)
    p.add_argument("--N", type=int, default=1, help="lattice dimension")
    p.add_argument("--noise-variance", type=float, default=1.0)
    p.add_argument("--csv", help="per-layer CSV (layer, receiver, errors, trials)")
    p.set_defaults(func=cmd_simulate)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"error at {exc.pointer or '/'}: {exc}", file=sys.stderr)
        return 2
    except (StateSpaceTooLarge, CodebookTooLarge, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
