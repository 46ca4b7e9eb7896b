"""
Entry point for ``python -m src.cli``.

Exit codes: 0 on success, 2 for invalid input or configuration, 3 when a
numerical procedure fails, 1 for anything else the library raises.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from pydantic import ValidationError as PydanticValidationError

from src import __version__
from src.cli.commands import certify, glue, optimize, spectrum, sweep
from src.models.run import config_error
from src.utils.errors import SurfaceLabError
from src.utils.logging import setup_logging

logger = logging.getLogger(__name__)

COMMANDS = (spectrum, optimize, glue, sweep, certify)


def _global_flags(parser: argparse.ArgumentParser, default) -> None:
    parser.add_argument("--seed", type=int, default=default, help="single source of randomness")
    parser.add_argument("--out", type=Path, default=default, help="run directory")
    parser.add_argument("--jobs", type=int, default=default, help="parallel sweep points")
    parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        type=str.upper,
        default=default,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m src.cli",
        description="Spectral Surgery Lab: eigenvalue optimization and gluing experiments",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, None)
    # the same flags after the subcommand; SUPPRESS keeps the top-level values
    shared = argparse.ArgumentParser(add_help=False)
    _global_flags(shared, argparse.SUPPRESS)

    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers, [shared])
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    setup_logging(level=args.log_level)
    try:
        return args.handler(args, argv)
    except PydanticValidationError as exc:
        err = config_error(exc, "arguments")
        logger.debug(err.message)
        print(f"error: {err.message}", file=sys.stderr)
        return err.exit_code
    except SurfaceLabError as exc:
        logger.debug(f"{type(exc).__name__}: {exc.message}", exc_info=True)
        print(f"error: {exc.message}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:
        logger.exception(f"{args.command} failed")
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
