"""Command-line front end.

Subcommands: ``run``, ``compare``, ``scaling``, ``bounds``. Exit codes:
0 success, 2 configuration error, 3 divergence, 4 oracle failure.
"""

from __future__ import annotations

import argparse
import sys

from .algorithms import DivergenceError
from .config import ConfigError, load_config
from .experiments import (
    bounds_report,
    experiment_compare,
    experiment_run,
    experiment_scaling,
)
from .objectives import DegenerateDataError, OracleFailureError
from .topology import GraphGenerationError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_ORACLE = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gradtrack",
        description="Multi-agent gradient-tracking experiments and rate bounds",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "run the configured algorithms, one trajectory CSV each"),
        ("compare", "run all algorithms on a shared setup, merged error CSV"),
        ("scaling", "rounds-to-tolerance across graph sizes"),
        ("bounds", "rate matrix, step rules, and bounds, no simulation"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="path to a JSON config")
        cmd.add_argument("--out", default=".", help="output directory")
        cmd.add_argument(
            "--seed-override",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a seed field, e.g. data_seed=7 (repeatable)",
        )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed_override)
        if args.command == "run":
            experiment_run(cfg, args.out)
        elif args.command == "compare":
            experiment_compare(cfg, args.out)
        elif args.command == "scaling":
            experiment_scaling(cfg, args.out)
        else:
            bounds_report(cfg, args.out)
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (OracleFailureError, DegenerateDataError) as exc:
        print(f"oracle failure: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except (ConfigError, GraphGenerationError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
