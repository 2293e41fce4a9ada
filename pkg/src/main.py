# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Main entry point for the intersection failure planner.
Dispatches the experiment subcommands and starts the MCP server for `serve`.
"""

import argparse
import logging
import sys

from . import tools  # noqa: F401 - Import tools to register them with MCP server
from .common.config import LOG_LEVEL, MCP_TRANSPORT, resolve_config
from .common.server import mcp
from .common.validation import VALID_SCENARIOS, ConfigurationError
from .harness.commands import COMMANDS, cmd_replay
from .harness.manifest import MissingArtifactError

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="failure-planner",
        description="Failure sampling, distillation and robust planning at an unsignalised intersection.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--seed", type=int, help="Root seed of every campaign")
    common.add_argument(
        "--scenario",
        choices=[*VALID_SCENARIOS, "all"],
        help="Intruder spawn scenario (default: all)",
    )
    common.add_argument("--out", help="Run directory")
    common.add_argument("--workers", type=int, help="Simulation worker processes")

    commands = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        commands.add_parser(name, parents=[common])
    replay = commands.add_parser("replay", parents=[common], help="Re-run a recorded command and compare outputs")
    replay.add_argument("--command", dest="replay_command", required=True, choices=sorted(COMMANDS))
    commands.add_parser("serve", help="Expose the simulator and samplers as MCP tools")
    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        try:
            mcp.run(transport=MCP_TRANSPORT)  # type: ignore[arg-type]
        except Exception as e:
            logger.error(f"Error running mcp: {e}")
            return 1
        return 0

    scenarios = list(VALID_SCENARIOS) if args.scenario == "all" else [args.scenario] if args.scenario else None
    try:
        config = resolve_config(args.config, seed=args.seed, scenarios=scenarios, out=args.out, workers=args.workers)
        if args.command == "replay":
            result = cmd_replay(config, args.replay_command)
            return 0 if result.identical else 2
        COMMANDS[args.command](config, None)
    except (ConfigurationError, MissingArtifactError) as e:
        logger.error(str(e))
        return 1
    return 0


def main() -> None:
    """
    Main entry point for the failure-planner command.
    """
    # Configure logging to stderr
    logging.basicConfig(
        level=getattr(logging, LOG_LEVEL, logging.INFO),
        format="%(asctime)s %(levelname)s %(message)s",
    )
    sys.exit(run())


if __name__ == "__main__":
    main()
