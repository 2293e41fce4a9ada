# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Tool for drawing failures from a trained (or distilled) sampler via the MCP server.
"""

import logging
import math
from pathlib import Path

import numpy as np
from fastmcp.exceptions import ToolError, ValidationError

from ..common.server import mcp
from ..common.storage import ArtifactFormatError
from ..diffusion.denoiser import DenoiserModel
from ..diffusion.training import scenario_evaluator
from ..sim.noise import rng_for
from ..sim.scenario import SimulationError
from .simulate import check_count, parse_branch, tool_config

logger = logging.getLogger(__name__)


@mcp.tool()
async def sample_failures(model_path: str, count: int = 10, robustness: float = 0.0, seed: int = 0) -> dict:
    """
    Draws sensor-noise sequences from a sampler checkpoint and simulates them.

    Args:
        model_path (str): Path to a teacher.cfnn or student.cfnn checkpoint.
        count (int): Number of samples (1 to 10000).
        robustness (float): Target robustness to condition on; 0 asks for collisions.
        seed (int): Seed of the initial states and of the sampler.

    Returns:
        dict: The checkpoint's scenario, the achieved robustness of every sample,
        the number of collisions and the failure rate.
    """
    check_count(count)
    if not math.isfinite(robustness) or robustness < 0:
        raise ValidationError(f"robustness must be a finite non-negative number, got: {robustness}")
    if seed < 0:
        raise ValidationError(f"seed must be non-negative, got: {seed}")
    path = Path(model_path)
    if not path.is_file():
        raise ValidationError(f"Checkpoint not found: {model_path}")
    try:
        model = DenoiserModel.load(path)
    except (ArtifactFormatError, OSError) as e:
        logger.error(f"Failed to load sampler {model_path}: {e}")
        raise ToolError(f"Failed to load sampler {model_path}: {e}") from e
    if not model.scenario:
        raise ValidationError(f"Checkpoint {model_path} does not record its scenario")
    spawn = parse_branch(model.scenario, "checkpoint scenario")

    config = tool_config()
    evaluator = scenario_evaluator(config, spawn)
    if model.noise_dim != evaluator.noise_dim:
        raise ValidationError(
            f"Checkpoint noise dimension {model.noise_dim} does not match the horizon ({evaluator.noise_dim})"
        )
    case_rng = rng_for(seed, 0)
    cases = [evaluator.sample_s0(case_rng) for _ in range(count)]
    s0 = np.stack([case.s0 for case in cases])
    try:
        noise = model.sample_batch(np.full(count, robustness), s0, rng_for(seed, 1))
        achieved = [evaluator.evaluate(case, noise[i]) for i, case in enumerate(cases)]
    except SimulationError as e:
        logger.error(f"Simulating sampled noise failed: {e}")
        raise ToolError(f"Simulating sampled noise failed: {e}") from e

    failures = sum(rho == 0.0 for rho in achieved)
    logger.info(f"Sampled {count} sequences from {model_path}: {failures} failures")
    return {
        "scenario": spawn.label,
        "samples": count,
        "failures": failures,
        "failure_rate": failures / count,
        "robustness": achieved,
    }
