"""Command line front end: one subcommand per operation, errors mapped to exit codes."""

from __future__ import annotations

from connectedness_surface.cli.cli import RunConfig, build_parser, main, parse_args
from connectedness_surface.cli.commands import COMMANDS

__all__ = ["COMMANDS", "RunConfig", "build_parser", "main", "parse_args"]
