# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Test utilities and helper functions for the intersection failure planner test suite.
"""

import itertools
import json
import os
from typing import Any

import numpy as np

from src.common.validation import (
    CampaignConfig,
    DiffusionConfig,
    DistillConfig,
    MetricsConfig,
    PlannerConfig,
    RunConfig,
)
from src.sim.geometry import Branch
from src.sim.scenario import InitialState, Scenario, vehicle_on_route
from src.sim.world import Simulator
from src.solver.lp import LinearProgram, RowSense


def tiny_config(out: str = "runs/test", scenarios: list[str] | None = None, **campaign: Any) -> RunConfig:
    """A RunConfig small enough for unit and integration tests."""
    return RunConfig(
        diffusion=DiffusionConfig(
            steps=4,
            percentiles=[100.0],
            samples_per_round=24,
            updates_per_round=4,
            batch_size=8,
            hidden=16,
            blocks=1,
            time_embedding_dim=4,
        ),
        distill=DistillConfig(
            dataset_size=16,
            supervised_batch_size=8,
            supervised_steps=2,
            gan_batch_size=8,
            gan_iterations=4,
            checkpoint_every=2,
            discriminator_hidden=16,
            validation_fraction=0.25,
        ),
        planner=PlannerConfig(total_samples=6, elite_samples=2, node_limit=10),
        metrics=MetricsConfig(k=2, sample_count=6),
        campaign=CampaignConfig(
            seed=7,
            scenarios=scenarios or ["east"],
            mc_count=campaign.pop("mc_count", 40),
            plan_eval_count=campaign.pop("plan_eval_count", 1),
            out=out,
            **campaign,
        ),
    )


def straight_scenario(intruder_spawn: Branch = Branch.EAST, intruder_destination: Branch = Branch.WEST) -> Scenario:
    return Scenario(
        intruder_spawn=intruder_spawn,
        intruder_destination=intruder_destination,
        ego_destination=Branch.NORTH,
        intruder_idm_delta=4.0,
    )


def placed_state(
    simulator: Simulator,
    scenario: Scenario,
    ego_distance: float,
    ego_speed: float,
    intruder_distance: float,
    intruder_speed: float,
) -> InitialState:
    """Both vehicles on their routes at the given distances before the intersection."""
    ego_route = scenario.ego_route(simulator.world)
    intruder_route = scenario.intruder_route(simulator.world)
    return InitialState(
        ego=vehicle_on_route(ego_route, ego_route.entry_progress - ego_distance, ego_speed),
        intruder=vehicle_on_route(intruder_route, intruder_route.entry_progress - intruder_distance, intruder_speed),
    )


def vertex_enumeration(lp: LinearProgram) -> float | None:
    """
    Brute-force optimum of a small bounded LP over all vertices.

    Every choice of ``n`` active constraints among rows and finite bounds is
    solved as a square system; feasible solutions are compared.
    """
    n = lp.num_vars
    planes: list[tuple[np.ndarray, float]] = []
    for row, rhs in zip(lp.matrix, lp.rhs, strict=True):
        planes.append((np.asarray(row, dtype=float), float(rhs)))
    for j in range(n):
        unit = np.zeros(n)
        unit[j] = 1.0
        if np.isfinite(lp.lower[j]):
            planes.append((unit, float(lp.lower[j])))
        if np.isfinite(lp.upper[j]):
            planes.append((unit, float(lp.upper[j])))
    best: float | None = None
    for combo in itertools.combinations(range(len(planes)), n):
        matrix = np.array([planes[i][0] for i in combo])
        if abs(np.linalg.det(matrix)) < 1e-10:
            continue
        x = np.linalg.solve(matrix, np.array([planes[i][1] for i in combo]))
        if lp.violation(x) <= 1e-9:
            value = lp.value(x) if lp.maximize else -lp.value(x)
            if best is None or value > best:
                best = value
    if best is None:
        return None
    return best if lp.maximize else -best


def random_bounded_lp(rng: np.random.Generator, n: int = 3, m: int = 3) -> LinearProgram:
    """A random LP with box bounds [0, 5] and ``m`` random <= rows through a feasible point."""
    a = rng.uniform(-1.0, 1.0, size=(m, n))
    interior = rng.uniform(0.5, 2.0, size=n)
    b = a @ interior + rng.uniform(0.1, 1.0, size=m)
    return LinearProgram.build(
        objective=rng.uniform(-1.0, 1.0, size=n),
        matrix=a,
        rhs=b,
        senses=[RowSense.LE] * m,
        lower=np.zeros(n),
        upper=np.full(n, 5.0),
    )


def extract_call_tool_result(result) -> Any:
    """
    Extract data from CallToolResult or return direct result.

    This helper handles the different ways MCP tools can return data
    depending on the test context.
    """
    if hasattr(result, "content") and result.content:
        # Handle CallToolResult with TextContent
        return json.loads(result.content[0].text)
    else:
        # Handle direct result
        return result


class MockEnvironment:
    """Context manager for temporarily setting environment variables in tests."""

    def __init__(self, env_vars: dict[str, str]):
        self.env_vars = env_vars
        self.original_values = {}

    def __enter__(self):
        for key, value in self.env_vars.items():
            self.original_values[key] = os.environ.get(key)
            os.environ[key] = value
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        for key in self.env_vars:
            original_value = self.original_values[key]
            if original_value is None:
                os.environ.pop(key, None)
            else:
                os.environ[key] = original_value
