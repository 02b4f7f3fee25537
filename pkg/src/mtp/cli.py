"""Command-line entry point: ``mtp {plan,sweep,compare,coverage}``.

Exit codes: 0 on success, 2 for configuration errors, 3 for runtime failures.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from mtp import experiments
from mtp.csvio import SchemaError
from mtp.experiments import ConfigError, ExperimentConfig

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

COMMANDS = {
    "plan": experiments.run_plan,
    "sweep": experiments.run_sweep,
    "compare": experiments.run_compare,
    "coverage": experiments.run_coverage,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits with 2 already; keep message format
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mtp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="INI file with [env], [planner], [run], [randomize]")
        p.add_argument("--seed", type=int, action="append", help="repeatable; overrides [run] seeds")
        p.add_argument("--out", type=Path, required=True, help="output directory")
        p.add_argument("--planner", help="e.g. mtp-akima, mtp-bspline(2), mppi, ps, cem")
        p.add_argument("--env", help="navigation, double_integrator, pendulum")
        if name == "compare":
            p.add_argument("--planners", help="comma-separated planner names")
        if name == "sweep":
            p.add_argument("--sweep", choices=experiments.SWEEP_KINDS)
            p.add_argument("--values", help="comma-separated values; MxN cells for grid_mn")
        p.add_argument("--max-steps", type=int)
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    changes = {
        "seeds": tuple(args.seed) if args.seed else None,
        "planner": args.planner,
        "env": args.env,
        "max_steps": args.max_steps,
    }
    if getattr(args, "planners", None):
        changes["planners"] = tuple(p.strip() for p in args.planners.split(",") if p.strip())
    if getattr(args, "sweep", None):
        changes["sweep"] = args.sweep
    if getattr(args, "values", None):
        kind = changes.get("sweep") or config.sweep
        raw = args.values.replace(",", " ").split()
        changes["sweep_values"] = experiments._parse_sweep_values(
            kind, " ".join(raw) if kind == "grid_mn" else tuple(experiments._coerce(v) for v in raw)
        )
    try:
        return config.with_overrides(**changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = resolve_config(args)
        COMMANDS[args.command](config, args.out)
    except (ConfigError, SchemaError) as exc:
        print(f"mtp: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, ArithmeticError, OSError, ValueError) as exc:
        print(f"mtp: run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
