# Copyright (c) 2023 Graphcore Ltd. All rights reserved.
import argparse
import logging
import os
import sys

from .frontend.run_pipeline import (
    analyze_parser,
    exit_code_for,
    reduce_pfaffian_parser,
    run_analyze,
    run_reduce_pfaffian,
    run_validate,
    validate_parser,
)

LOG_LEVEL_ENV_VAR = "GAUGE2D_LOG_LEVEL"
VERBOSITY_LEVELS = [logging.WARNING, logging.INFO, logging.DEBUG]


def configure_logging(verbose: int):
    level = os.getenv(LOG_LEVEL_ENV_VAR)
    if level is None or verbose:
        level = VERBOSITY_LEVELS[min(verbose, len(VERBOSITY_LEVELS) - 1)]
    else:
        level = level.upper()
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s")


def main(raw_args) -> int:
    parser = argparse.ArgumentParser(prog="gauge2d")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="Increase log verbosity")

    subparsers = parser.add_subparsers(dest="subparser")

    analyze_subparser = subparsers.add_parser(
        "analyze", description="Compute and verify gauge generators and reducibility relations."
    )
    analyze_parser(analyze_subparser)
    validate_subparser = subparsers.add_parser("validate", description="Check a system file without analyzing it.")
    validate_parser(validate_subparser)
    reduce_subparser = subparsers.add_parser(
        "reduce-pfaffian", description="Reduce a Pfaffian system to Cartan normal form."
    )
    reduce_pfaffian_parser(reduce_subparser)

    args = parser.parse_args(raw_args[1:])

    if len(raw_args) <= 1 or args.subparser is None:
        parser.print_usage()
        sys.exit(1)

    configure_logging(args.verbose)
    commands = {"analyze": run_analyze, "validate": run_validate, "reduce-pfaffian": run_reduce_pfaffian}
    try:
        return commands[args.subparser](args)
    except Exception as error:
        code = exit_code_for(error)
        if code is None:
            raise
        logging.error(f"{type(error).__name__}: {error}")
        return code


def cli():
    sys.exit(main(sys.argv))


if __name__ == "__main__":
    cli()
