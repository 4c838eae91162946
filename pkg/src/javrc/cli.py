"""Command line entry point: ``javrc <subcommand> --config run.toml``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import harness
from .config import ExperimentConfig, load_config
from .errors import ConfigError, EmptyInput, ParseError, UnsupportedFormat

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 2, 3

COMMANDS = {
    "fingerprint": harness.cmd_fingerprint,
    "curves": harness.cmd_curves,
    "allocate": harness.cmd_allocate,
    "sweep": harness.cmd_sweep,
    "evaluate": harness.cmd_evaluate,
    "report": harness.cmd_report,
    "all": harness.run_all,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="javrc", description="Joint audio/video rate-coverage experiments.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="TOML experiment config")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="override the output directory")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig().validate()
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("seed must be an unsigned 64-bit integer")
            cfg.seed = args.seed
        if args.out:
            cfg.out = args.out
        COMMANDS[args.command](cfg)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, ParseError, UnsupportedFormat, EmptyInput) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
