"""Command-line entry point: gzk-lab simulate | radius-track | probe | sweep."""

import argparse
import logging
import sys
from typing import List, Optional

from .config import settings
from .errors import ConfigError, DomainError, LabError, MemoryGuardError, SpecMismatchError
from .experiments import (
    COMMANDS,
    EXIT_FAILED,
    EXIT_USAGE,
    PROBES,
    cmd_probe,
    cmd_radius_track,
    cmd_simulate,
    cmd_sweep,
)
from .logging_config import setup_logging
from .runconfig import RunConfig, load_config, with_override

logger = logging.getLogger(__name__)

USAGE_ERRORS = (ConfigError, DomainError, SpecMismatchError, MemoryGuardError)


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration (defaults when omitted)")
    common.add_argument("--out", help="output directory (overrides run.output_dir)")
    common.add_argument(
        "--force", action="store_true", help="write into an existing output directory"
    )
    common.add_argument("--seed", type=int, help="seed for random data and probes")
    common.add_argument("--log-level", default=None, help=f"default {settings.log_level}")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="gzk-lab",
        description="Pseudo-spectral ZK/mZK simulator and analyticity diagnostics",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("simulate", parents=[common], help="evolve and write diagnostics")
    commands.add_parser(
        "radius-track", parents=[common], help="track sigma_hat(T) against the bound curves"
    )
    probe = commands.add_parser("probe", parents=[common], help="run one estimate probe")
    probe.add_argument("name", choices=sorted(PROBES))
    sweep = commands.add_parser("sweep", parents=[common], help="one run per value of a key")
    sweep.add_argument("--axis", required=True, help="dotted config key, e.g. integrator.dt")
    sweep.add_argument("--values", required=True, help="comma-separated values")
    sweep.add_argument("--command", dest="sweep_command", default="simulate", choices=COMMANDS)
    sweep.add_argument("--workers", type=int, default=None, help="process pool size")
    return parser


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    if args.out:
        cfg = with_override(cfg, "run.output_dir", args.out)
    if args.seed is not None:
        cfg = with_override(cfg, "run.seed", args.seed)
        cfg = with_override(cfg, "probes.seed", args.seed)
    return cfg


def run(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    if args.command == "simulate":
        return cmd_simulate(cfg, args.force)
    if args.command == "radius-track":
        return cmd_radius_track(cfg, args.force)
    if args.command == "probe":
        return cmd_probe(cfg, args.name, args.force)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    return cmd_sweep(cfg, args.axis, values, args.sweep_command, args.force, args.workers)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments and run one command.

    Returns:
        0 on success, 1 on a failed assertion or blow-up, 2 on a configuration or usage error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    setup_logging(args.log_level)
    try:
        return run(args)
    except USAGE_ERRORS as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_USAGE
    except LabError as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        return EXIT_FAILED
    except Exception as e:
        logger.error(f"Error executing '{args.command}': {e}", exc_info=True)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
