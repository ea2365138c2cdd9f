"""CLI interface for the connectedness_surface package."""

from __future__ import annotations

import argparse
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

from connectedness_surface.cli.commands import COMMANDS
from connectedness_surface.synth import REGIMES
from connectedness_surface.utils import (
    WORKERS_ENV,
    ComputationError,
    InputError,
    InvariantViolation,
)

if TYPE_CHECKING:
    from collections.abc import Sequence

logger = logging.getLogger("connectedness_surface")

EXIT_INPUT = 2
EXIT_COMPUTATION = 3
EXIT_INVARIANT = 4


@dataclass(frozen=True)
class RunConfig(argparse.Namespace):
    """Namespace for command line arguments."""

    command: str
    input: Path | None = None
    output: Path | None = None
    lambda_grid: str | None = None
    mu0_grid: str | None = None
    long_only: bool = False
    window: int = 252
    horizon: int = 10
    shrinkage: str = "auto"
    seed: int | None = None
    tol: float = 1e-9
    lam: float = 0.5
    mu0: float | None = None
    n: int = 5
    t: int = 1000
    regime: str = "iid"
    top: int = 15
    h: float = 1e-5
    at: str | None = None
    rolling: int | None = None
    workers: int | None = None
    verbose: bool = False

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise InputError(f"Unknown command {self.command!r}.")
        if self.command == "synth" and self.seed is None:
            raise InputError("synth needs --seed.")
        if not self.tol > 0:
            raise InputError(f"--tol must be positive, got {self.tol}")
        if self.mu0 is not None and not math.isfinite(self.mu0):
            raise InputError(f"--mu0 must be finite, got {self.mu0}")
        if self.top < 1:
            raise InputError(f"--top must be positive, got {self.top}")


def build_parser() -> argparse.ArgumentParser:
    """The argument parser with one subcommand per operation."""
    parser = argparse.ArgumentParser(
        prog="connectedness-surface",
        description="Efficient surfaces of variance, connectedness and expected return.",
    )
    parser.add_argument(
        "command", choices=tuple(COMMANDS), help="Operation to run"
    )
    parser.add_argument(
        "-i", "--input", type=Path, help="Return CSV (estimate) or model JSON"
    )
    parser.add_argument(
        "-o",
        "--output",
        type=Path,
        help="Output file; sweeps write OUTPUT.csv and OUTPUT.json",
    )
    parser.add_argument(
        "--lambda-grid", type=str, metavar="a:b:step", help="Lambda grid (default 0:1:0.05)"
    )
    parser.add_argument(
        "--mu0-grid", type=str, metavar="a:b:step|auto", help="Return-target grid"
    )
    parser.add_argument(
        "--long-only", action="store_true", default=None, help="Forbid short sales"
    )
    parser.add_argument("--window", type=int, help="Estimation window length")
    parser.add_argument("--horizon", type=int, help="FEVD forecast horizon")
    parser.add_argument("--shrinkage", type=str, metavar="x|auto", help="Shrinkage intensity")
    parser.add_argument("--seed", type=int, help="Seed of the synthetic panel")
    parser.add_argument("--tol", type=float, help="Active-set tolerance")
    parser.add_argument(
        "--lambda", dest="lam", type=float, help="Trade-off parameter of a single solve"
    )
    parser.add_argument("--mu0", type=float, help="Return target of a single solve")
    parser.add_argument("--n", type=int, help="Number of synthetic assets")
    parser.add_argument("--t", type=int, help="Number of synthetic observations")
    parser.add_argument("--regime", type=str, choices=REGIMES, help="Synthetic regime")
    parser.add_argument("--top", type=int, help="Number of betas to report")
    parser.add_argument("--h", type=float, help="Finite-difference step of check")
    parser.add_argument("--at", type=str, help="Last date of the estimation window")
    parser.add_argument(
        "--rolling", type=int, metavar="STEP", help="Estimate every STEP-th window"
    )
    parser.add_argument(
        "-j",
        "--workers",
        type=int,
        help=f"Worker threads, 0 for all cores (settable by {WORKERS_ENV})",
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", default=None, help="Log debug output"
    )
    return parser


def _to_config(args: argparse.Namespace) -> RunConfig:
    return RunConfig(**{k: v for k, v in vars(args).items() if v is not None})


def parse_args(argv: Sequence[str] | None = None) -> RunConfig:
    """Parse CLI arguments."""
    return _to_config(build_parser().parse_args(argv))


def main(argv: Sequence[str] | None = None) -> int:
    """Run one command and map its errors to exit codes.

    Returns:
        0 on success, 2 for invalid input, 3 when a computation fails and 4 when a
        result violates one of its certificates.
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        conf = _to_config(args)
        logger.info("Running %s.", conf.command)
        code = COMMANDS[conf.command](conf)
    except (InputError, OSError) as err:
        logger.error("%s", err)  # noqa: TRY400
        return EXIT_INPUT
    except ComputationError as err:
        logger.error("%s", err)  # noqa: TRY400
        return EXIT_COMPUTATION
    except InvariantViolation as err:
        logger.error("%s", err)  # noqa: TRY400
        return EXIT_INVARIANT
    logger.info("Finished %s with exit code %d.", conf.command, code)
    return code


__all__ = ["RunConfig", "build_parser", "main", "parse_args"]
