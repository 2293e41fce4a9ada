# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Scenario and vehicle-state types plus the default initial-state sampler.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..common.validation import WorldConfig
from .geometry import Branch, Route, WorldGeometry

logger = logging.getLogger(__name__)

EGO_SPAWN = Branch.SOUTH
STATE_DIM = 8
_MAX_DRAWS = 1000


class SimulationError(RuntimeError):
    """Raised when a simulation cannot proceed (bad inputs or policy output)."""

    pass


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    vx: float
    vy: float
    route_progress: float
    free: bool = False

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def velocity(self) -> np.ndarray:
        return np.array([self.vx, self.vy])

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.vx, self.vy])


def vehicle_on_route(route: Route, progress: float, speed: float) -> VehicleState:
    """Place a route-following vehicle at ``progress`` moving at ``speed``."""
    if speed < 0:
        raise SimulationError(f"speed must be non-negative, got: {speed}")
    point = route.point_at(progress)
    velocity = speed * route.tangent_at(progress)
    return VehicleState(
        x=float(point[0]),
        y=float(point[1]),
        vx=float(velocity[0]),
        vy=float(velocity[1]),
        route_progress=float(progress),
    )


def snap_to_route(route: Route, x: float, y: float, vx: float, vy: float) -> VehicleState:
    """Project a free state onto a route; tangential speed is clamped at zero."""
    progress, _ = route.project(x, y)
    speed = max(0.0, float(np.dot([vx, vy], route.tangent_at(progress))))
    return vehicle_on_route(route, progress, speed)


@dataclass(frozen=True)
class Scenario:
    intruder_spawn: Branch
    intruder_destination: Branch
    ego_destination: Branch
    intruder_idm_delta: float

    def __post_init__(self) -> None:
        if self.intruder_spawn == self.intruder_destination:
            raise ValueError(
                f"Intruder destination must differ from its spawn ({self.intruder_spawn.label})"
            )
        if self.ego_destination == EGO_SPAWN:
            raise ValueError("Ego destination must differ from the ego spawn (south)")
        if not (math.isfinite(self.intruder_idm_delta) and self.intruder_idm_delta > 0):
            raise ValueError(f"intruder_idm_delta must be positive, got: {self.intruder_idm_delta}")

    def ego_route(self, world: WorldGeometry) -> Route:
        return world.route(EGO_SPAWN, self.ego_destination)

    def intruder_route(self, world: WorldGeometry) -> Route:
        return world.route(self.intruder_spawn, self.intruder_destination)


def sample_scenario(
    spawn: Branch | str,
    rng: np.random.Generator,
    delta_range: tuple[float, float] = (3.5, 4.5),
) -> Scenario:
    """Uniform legal destinations for both vehicles and a uniform intruder exponent."""
    spawn = Branch.parse(spawn)
    intruder_exits = [b for b in Branch if b != spawn]
    ego_exits = [b for b in Branch if b != EGO_SPAWN]
    return Scenario(
        intruder_spawn=spawn,
        intruder_destination=intruder_exits[int(rng.integers(len(intruder_exits)))],
        ego_destination=ego_exits[int(rng.integers(len(ego_exits)))],
        intruder_idm_delta=float(rng.uniform(*delta_range)),
    )


@dataclass(frozen=True)
class InitialState:
    ego: VehicleState
    intruder: VehicleState

    def separation(self) -> float:
        return float(np.hypot(*(self.ego.position - self.intruder.position)))


def state_vector(state: InitialState) -> np.ndarray:
    """The 8-vector s0: ego x, y, vx, vy then intruder x, y, vx, vy."""
    return np.concatenate([state.ego.as_array(), state.intruder.as_array()])


def initial_state_from_vector(
    world: WorldGeometry, scenario: Scenario, s0: np.ndarray
) -> InitialState:
    """Rebuild route-following vehicles from an 8-vector by projecting onto the scenario routes."""
    s0 = np.asarray(s0, dtype=float)
    if s0.shape != (STATE_DIM,) or not np.all(np.isfinite(s0)):
        raise SimulationError(f"s0 must be a finite {STATE_DIM}-vector, got shape {s0.shape}")
    return InitialState(
        ego=snap_to_route(scenario.ego_route(world), *s0[:4]),
        intruder=snap_to_route(scenario.intruder_route(world), *s0[4:]),
    )


def sample_initial_state(
    world: WorldGeometry,
    scenario: Scenario,
    config: WorldConfig,
    rng: np.random.Generator,
) -> InitialState:
    """
    Draw distances to the intersection and speeds uniformly from the configured ranges.

    Draws whose initial separation is within twice the collision radius sum are
    rejected (only possible when both vehicles spawn on the same branch).
    """
    ego_route = scenario.ego_route(world)
    intruder_route = scenario.intruder_route(world)
    min_separation = 2.0 * float(config.collision_radius_sum)  # type: ignore[arg-type]
    for _ in range(_MAX_DRAWS):
        ego = vehicle_on_route(
            ego_route,
            ego_route.entry_progress - rng.uniform(*config.ego_distance),
            rng.uniform(*config.ego_speed),
        )
        intruder = vehicle_on_route(
            intruder_route,
            intruder_route.entry_progress - rng.uniform(*config.intruder_distance),
            rng.uniform(*config.intruder_speed),
        )
        state = InitialState(ego=ego, intruder=intruder)
        if state.separation() > min_separation:
            return state
    raise SimulationError(
        f"Could not draw a non-overlapping initial state for {scenario} after {_MAX_DRAWS} attempts"
    )
