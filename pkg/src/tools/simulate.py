# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Tools for inspecting scenarios and running prior-noise simulations via the MCP server.
"""

import logging
from dataclasses import replace

import numpy as np
from fastmcp.exceptions import ToolError, ValidationError

from ..common.config import MCP_CONFIG_PATH, resolve_config
from ..common.server import mcp
from ..common.validation import ConfigurationError, RunConfig
from ..harness.campaigns import run_mc_campaign
from ..sim.geometry import Branch
from ..sim.noise import NoisePrior, rng_for
from ..sim.outcomes import STATE_COLUMNS
from ..sim.scenario import EGO_SPAWN, Scenario, SimulationError, sample_initial_state, sample_scenario
from ..sim.world import Simulator

logger = logging.getLogger(__name__)

MAX_TOOL_SIMULATIONS = 10000


def tool_config(seed: int | None = None) -> RunConfig:
    """Configuration for tool calls: ``CFS_CONFIG`` if set, environment overrides, then ``seed``."""
    try:
        return resolve_config(MCP_CONFIG_PATH, seed=seed)
    except ConfigurationError as e:
        logger.error(f"Invalid server configuration: {e}")
        raise ToolError(f"Invalid server configuration: {e}") from e


def parse_branch(name: str, role: str) -> Branch:
    try:
        return Branch.parse(name)
    except ValueError as e:
        logger.error(f"Invalid {role} '{name}'")
        raise ValidationError(f"Invalid {role}: {name}. Must be one of: {[b.label for b in Branch]}") from e


def check_count(count: int) -> None:
    if not 1 <= count <= MAX_TOOL_SIMULATIONS:
        raise ValidationError(f"count must be between 1 and {MAX_TOOL_SIMULATIONS}, got: {count}")


@mcp.tool()
async def list_scenarios() -> dict:
    """
    Lists the intruder spawn scenarios and the legal destinations of both vehicles.

    Returns:
        dict: "scenarios" (one entry per intruder spawn branch with its legal
        intruder and ego destinations), "ego_spawn", "horizon" and the sensor
        noise variance in use.
    """
    config = tool_config()
    scenarios = [
        {
            "name": spawn.label,
            "intruder_destinations": [b.label for b in Branch if b != spawn],
            "ego_destinations": [b.label for b in Branch if b != EGO_SPAWN],
        }
        for spawn in Branch
    ]
    return {
        "scenarios": scenarios,
        "ego_spawn": EGO_SPAWN.label,
        "horizon": config.world.horizon,
        "noise_variance": NoisePrior.from_config(config.noise).variance,
    }


@mcp.tool()
async def simulate_scenario(
    scenario: str,
    seed: int = 0,
    intruder_destination: str | None = None,
    ego_destination: str | None = None,
) -> dict:
    """
    Runs one closed-loop simulation with the IDM ego under prior sensor noise.

    Args:
        scenario (str): Intruder spawn branch ("east", "west", "south" or "north").
        seed (int): Seed of the scenario, initial state and noise draw.
        intruder_destination (str, optional): Overrides the sampled intruder exit.
        ego_destination (str, optional): Overrides the sampled ego exit.

    Returns:
        dict: The scenario, robustness (minimum separation margin, 0 on collision),
        the collision flag and the trajectory with its column names.
    """
    spawn = parse_branch(scenario, "scenario")
    if seed < 0:
        raise ValidationError(f"seed must be non-negative, got: {seed}")
    config = tool_config()
    simulator = Simulator.from_config(config)
    rng = rng_for(seed, 0)
    drawn = sample_scenario(spawn, rng, config.idm.intruder_delta_range)
    try:
        chosen = Scenario(
            intruder_spawn=spawn,
            intruder_destination=(
                parse_branch(intruder_destination, "intruder destination")
                if intruder_destination
                else drawn.intruder_destination
            ),
            ego_destination=(
                parse_branch(ego_destination, "ego destination") if ego_destination else drawn.ego_destination
            ),
            intruder_idm_delta=drawn.intruder_idm_delta,
        )
    except ValueError as e:
        raise ValidationError(str(e)) from e

    try:
        initial = sample_initial_state(simulator.world, chosen, config.world, rng)
        eps = NoisePrior.from_config(config.noise).sample(rng, simulator.horizon)
        outcome = simulator.run_simulation(chosen, initial, eps)
    except SimulationError as e:
        logger.error(f"Simulation failed for {spawn.label}: {e}")
        raise ToolError(f"Simulation failed: {e}") from e

    logger.info(f"Simulated {spawn.label} (seed {seed}): robustness {outcome.robustness:.4f}")
    return {
        "scenario": {
            "intruder_spawn": chosen.intruder_spawn.label,
            "intruder_destination": chosen.intruder_destination.label,
            "ego_destination": chosen.ego_destination.label,
            "intruder_idm_delta": chosen.intruder_idm_delta,
        },
        "robustness": outcome.robustness,
        "collided": bool(outcome.collided),
        "columns": list(STATE_COLUMNS),
        "trajectory": outcome.trajectory.tolist(),
    }


@mcp.tool()
async def robustness_summary(scenario: str, count: int = 100, seed: int = 0) -> dict:
    """
    Runs a small Monte Carlo campaign with the IDM ego and summarises its robustness.

    Args:
        scenario (str): Intruder spawn branch.
        count (int): Number of simulations (1 to 10000).
        seed (int): Campaign seed; the same seed gives the same episodes as the `mc` command.

    Returns:
        dict: Simulation and failure counts, failure rate and robustness statistics.
    """
    spawn = parse_branch(scenario, "scenario")
    check_count(count)
    if seed < 0:
        raise ValidationError(f"seed must be non-negative, got: {seed}")
    config = tool_config(seed)
    try:
        episodes = run_mc_campaign(replace(config, campaign=replace(config.campaign, workers=1)), spawn, count)
    except SimulationError as e:
        logger.error(f"Campaign failed for {spawn.label}: {e}")
        raise ToolError(f"Campaign failed: {e}") from e

    rho = np.array([e.outcome.robustness for e in episodes])
    failures = int(np.sum(rho == 0.0))
    return {
        "scenario": spawn.label,
        "simulations": count,
        "failures": failures,
        "failure_rate": failures / count,
        "robustness": {
            "min": float(rho.min()),
            "mean": float(rho.mean()),
            "median": float(np.median(rho)),
            "max": float(rho.max()),
        },
    }
