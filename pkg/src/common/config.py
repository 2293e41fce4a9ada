# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Configuration loader for the intersection failure planner.
Loads settings from a JSON file plus environment variables with validation.
"""

import hashlib
import logging
import os
from pathlib import Path

from dotenv import load_dotenv

from .validation import ConfigurationError, RunConfig, load_validated_config

logger = logging.getLogger(__name__)

# Load environment variables
load_dotenv()

LOG_LEVEL = os.getenv("CFS_LOG_LEVEL", "INFO").upper()
RESOLVED_CONFIG_NAME = "config.resolved.json"

# MCP server settings (used by the `serve` subcommand)
MCP_TRANSPORT = os.getenv("CFS_MCP_TRANSPORT", "stdio")
MCP_CONFIG_PATH = os.getenv("CFS_CONFIG") or None


def resolve_config(
    path: str | Path | None = None,
    *,
    seed: int | None = None,
    scenarios: list[str] | None = None,
    out: str | None = None,
    workers: int | None = None,
) -> RunConfig:
    """
    Resolve the run configuration: defaults, file, environment, then CLI flags.

    Args:
        path: Optional JSON configuration file.
        seed, scenarios, out, workers: Command-line overrides (None keeps the value).

    Returns:
        RunConfig: The validated configuration.
    """
    config = load_validated_config(path)
    campaign = config.campaign
    if seed is not None:
        if seed < 0:
            raise ConfigurationError(f"--seed must be non-negative, got: {seed}")
        campaign.seed = seed
    if scenarios is not None:
        campaign.scenarios = scenarios
    if out is not None:
        campaign.out = out
    if workers is not None:
        if workers < 1:
            raise ConfigurationError(f"--workers must be >= 1, got: {workers}")
        campaign.workers = workers
    try:
        campaign.__post_init__()
    except ValueError as e:
        raise ConfigurationError(f"Invalid command-line override: {e}") from e
    return config


def config_digest(config: RunConfig) -> str:
    """sha256 of the canonical JSON form of a configuration."""
    return hashlib.sha256(config.to_json().encode("utf-8")).hexdigest()


def echo_config(config: RunConfig, out_dir: str | Path) -> Path:
    """Write the resolved configuration into the run directory."""
    target = Path(out_dir) / RESOLVED_CONFIG_NAME
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(config.to_json() + "\n", encoding="utf-8")
    logger.info(f"Resolved configuration written to {target}")
    return target
