"""Command-line front end.

Subcommands: ``solve-primal``, ``solve-dual``, ``verify``, ``sweep`` and
``oracle-compare``. Exit codes: 0 success, 1 config error, 2 solver
non-convergence (or a failed check), 3 hypotheses unmet.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .errors import ConfigurationError
from .experiment import (
    EXIT_CONFIG,
    ExperimentConfig,
    load_config,
    run_oracle_compare,
    run_solve_dual,
    run_solve_primal,
    run_sweep,
    run_verify,
)

COMMANDS = {
    "solve-primal": run_solve_primal,
    "solve-dual": run_solve_dual,
    "verify": run_verify,
    "oracle-compare": run_oracle_compare,
}


def _parse_param(text: str) -> tuple[str, tuple[float, ...]]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected NAME=v1,v2,..., got {text!r}")
    key, vals = text.split("=", 1)
    try:
        values = tuple(float(v) for v in vals.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    return key.strip(), values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI experiment config")
    common.add_argument("--out", metavar="DIR", help="output directory (created if missing)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--workers", type=int, help="parallel workers for sweeps")

    parser = argparse.ArgumentParser(
        prog="gldual",
        description="Primal/dual solves and duality verification for the "
                    "Ginzburg-Landau double-well problem.",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("solve-primal", "Newton solve for a primal critical point"),
        ("solve-dual", "minimize the reduced dual over the box C*"),
        ("verify", "primal solve, dual construction and full duality report"),
        ("oracle-compare", "compare the pipeline with a brute-force minimum on a tiny grid"),
    ]:
        sub.add_parser(name, help=help_text, parents=[common])
    sw = sub.add_parser("sweep", help="Cartesian parameter sweep of verify runs", parents=[common])
    sw.add_argument("--param", action="append", type=_parse_param, default=[],
                    metavar="NAME=v1,v2", help="swept parameter (repeatable)")
    sw.add_argument("--plot", action="store_true", help="write sweep.svg")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.workers is not None:
            overrides["workers"] = args.workers
        if args.command == "sweep":
            sweep = dict(cfg.sweep)
            sweep.update(dict(args.param))
            overrides["sweep"] = sweep
            overrides["plot"] = cfg.plot or args.plot
        if overrides:
            cfg = replace(cfg, **overrides)
        if args.command == "sweep":
            return run_sweep(cfg, out=args.out)
        return COMMANDS[args.command](cfg, out=args.out)
    except ConfigurationError as exc:
        print(f"gldual: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
