# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Campaigns, artifacts and the command bodies behind the CLI.
"""

from .campaigns import run_mc_campaign, run_plan_campaign, scenario_seed
from .commands import COMMANDS, ReplayResult, cmd_replay
from .manifest import ArtifactLayout, CommandRecord, MissingArtifactError, read_manifest, write_manifest
from .reports import read_report, write_report

__all__ = [
    "COMMANDS",
    "ArtifactLayout",
    "CommandRecord",
    "MissingArtifactError",
    "ReplayResult",
    "cmd_replay",
    "read_manifest",
    "read_report",
    "run_mc_campaign",
    "run_plan_campaign",
    "scenario_seed",
    "write_manifest",
    "write_report",
]
