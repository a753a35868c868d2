"""Command line for derating."""

from __future__ import annotations

import argparse
import sys
from collections.abc import Sequence

from .config import load_config
from .const import DEFAULT_CONFIG_PATH, LOGGER, NAME, VERSION, ExitCode
from .coordinator import PipelineCoordinator, exit_code_for
from .exceptions import DeratingError
from .utils import setup_logging

COMMANDS = ("graph", "embed", "campaign", "train-eval", "all")


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per pipeline stage."""
    parser = argparse.ArgumentParser(
        prog="derating",
        description=f"{NAME}: predict flip-flop functional derating from graph embeddings.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    parser.add_argument("command", choices=COMMANDS, help="pipeline stage to run")
    parser.add_argument(
        "-c", "--config", default=DEFAULT_CONFIG_PATH, metavar="PATH", help="YAML configuration"
    )
    parser.add_argument("--seed", type=int, default=None, metavar="N", help="global seed")
    parser.add_argument("-j", "--jobs", type=int, default=None, metavar="N", help="worker cap")
    parser.add_argument("-o", "--out", default=None, metavar="DIR", help="output directory")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    if args.jobs is not None and args.jobs < 1:
        setup_logging(verbose=args.verbose)
        LOGGER.error("--jobs must be at least 1")
        return ExitCode.CONFIG
    if args.seed is not None and args.seed < 0:
        setup_logging(verbose=args.verbose)
        LOGGER.error("--seed must not be negative")
        return ExitCode.CONFIG

    try:
        config = load_config(args.config, seed=args.seed, jobs=args.jobs, out=args.out)
    except DeratingError as exception:
        setup_logging(verbose=args.verbose)
        LOGGER.error("Cannot load configuration: %s", exception)
        return exit_code_for(exception)

    setup_logging(config.log_default, config.log_levels, verbose=args.verbose)
    return PipelineCoordinator(config).run(args.command)


if __name__ == "__main__":
    sys.exit(main())
