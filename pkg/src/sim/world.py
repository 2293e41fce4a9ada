# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Closed-loop simulation of the ego and intruder vehicles.

Both vehicles are point masses moving along their routes with unit time steps.
The ego observes the intruder through additive sensor noise; the intruder sees
the ego exactly.
"""

import logging
from typing import Protocol

import numpy as np

from ..common.validation import IDMConfig, RunConfig
from .geometry import WorldGeometry, build_world
from .idm import IDMParams, idm_acceleration, leader_inputs
from .outcomes import SimOutcome
from .scenario import (
    EGO_SPAWN,
    InitialState,
    Scenario,
    SimulationError,
    VehicleState,
    snap_to_route,
)

logger = logging.getLogger(__name__)

Acceleration = float | np.ndarray


class EgoPolicy(Protocol):
    def __call__(self, t: int, ego: VehicleState, observation: np.ndarray) -> Acceleration: ...


def _longitudinal(speed: float, accel: float, dt: float) -> tuple[float, float]:
    """Distance travelled and final speed; a braking vehicle stops instead of reversing."""
    final = speed + accel * dt
    if final >= 0.0:
        return speed * dt + 0.5 * accel * dt * dt, final
    return speed * speed / (2.0 * abs(accel)), 0.0


def advance_vehicle(route, vehicle: VehicleState, accel: Acceleration, dt: float = 1.0) -> VehicleState:
    """
    Forward-Euler update of one vehicle.

    A scalar acceleration moves the vehicle along its route (a free vehicle is
    snapped back first); a 2-vector moves it as a free point mass.
    """
    if np.ndim(accel) == 0:
        if vehicle.free:
            vehicle = snap_to_route(route, vehicle.x, vehicle.y, vehicle.vx, vehicle.vy)
        distance, speed = _longitudinal(vehicle.speed, float(accel), dt)
        progress = vehicle.route_progress + distance
        point = route.point_at(progress)
        velocity = speed * route.tangent_at(progress)
        return VehicleState(
            x=float(point[0]),
            y=float(point[1]),
            vx=float(velocity[0]),
            vy=float(velocity[1]),
            route_progress=float(progress),
        )
    a = np.asarray(accel, dtype=float)
    position = vehicle.position + vehicle.velocity * dt + 0.5 * a * dt * dt
    velocity = vehicle.velocity + a * dt
    progress, _ = route.project(float(position[0]), float(position[1]))
    return VehicleState(
        x=float(position[0]),
        y=float(position[1]),
        vx=float(velocity[0]),
        vy=float(velocity[1]),
        route_progress=progress,
        free=True,
    )


def observe(true_intruder: VehicleState, noise: np.ndarray) -> np.ndarray:
    """Noisy observation [x, y, vx, vy] of the intruder."""
    return true_intruder.as_array() + np.asarray(noise, dtype=float)


def separations(trajectory: np.ndarray) -> np.ndarray:
    trajectory = np.atleast_2d(trajectory)
    delta = trajectory[:, 0:2] - trajectory[:, 4:6]
    return np.hypot(delta[:, 0], delta[:, 1])


def robustness(trajectory: np.ndarray, collision_radius_sum: float) -> float:
    """Minimum over snapshots of the clearance between the two collision discs."""
    if np.size(trajectory) == 0:
        raise SimulationError("robustness of an empty trajectory is undefined")
    return float(np.min(np.maximum(0.0, separations(trajectory) - collision_radius_sum)))


class IdmEgoPolicy:
    """Fixed ego controller: IDM on the observed intruder projected onto its route."""

    def __init__(self, simulator: "Simulator", scenario: Scenario) -> None:
        self.simulator = simulator
        self.scenario = scenario
        self.ego_route = scenario.ego_route(simulator.world)
        self.intruder_route = scenario.intruder_route(simulator.world)
        self.conflict = simulator.world.conflict(self.ego_route, self.intruder_route)
        self.params = IDMParams.from_config(simulator.idm, simulator.idm.ego_delta)

    def acceleration(self, ego: VehicleState, intruder_state: np.ndarray) -> float:
        gap, dv = leader_inputs(
            self.ego_route,
            ego.route_progress,
            ego.speed,
            self.intruder_route,
            np.asarray(intruder_state[:2]),
            np.asarray(intruder_state[2:4]),
            self.conflict,
            self.simulator.collision_radius_sum,
            yield_on_tie=False,
        )
        return idm_acceleration(ego.speed, gap, dv, self.params)

    def __call__(self, t: int, ego: VehicleState, observation: np.ndarray) -> float:
        return self.acceleration(ego, observation)


class Simulator:
    """Deterministic intersection world for one configuration."""

    def __init__(
        self,
        world: WorldGeometry,
        idm: IDMConfig,
        horizon: int = 23,
        collision_radius_sum: float = 0.04,
    ) -> None:
        self.world = world
        self.idm = idm
        self.horizon = horizon
        self.collision_radius_sum = collision_radius_sum

    @classmethod
    def from_config(cls, config: RunConfig) -> "Simulator":
        world_config = config.world
        return cls(
            world=build_world(world_config.lane_width, world_config.branch_length),
            idm=config.idm,
            horizon=world_config.horizon,
            collision_radius_sum=float(world_config.collision_radius_sum),  # type: ignore[arg-type]
        )

    def intruder_acceleration(self, scenario: Scenario, ego: VehicleState, intruder: VehicleState) -> float:
        intruder_route = scenario.intruder_route(self.world)
        ego_route = scenario.ego_route(self.world)
        gap, dv = leader_inputs(
            intruder_route,
            intruder.route_progress,
            intruder.speed,
            ego_route,
            ego.position,
            ego.velocity,
            self.world.conflict(intruder_route, ego_route),
            self.collision_radius_sum,
            yield_on_tie=True,
        )
        params = IDMParams.from_config(self.idm, scenario.intruder_idm_delta)
        return idm_acceleration(intruder.speed, gap, dv, params)

    def step(
        self,
        scenario: Scenario,
        ego: VehicleState,
        intruder: VehicleState,
        ego_accel: Acceleration,
        intruder_accel: float,
        dt: float = 1.0,
    ) -> tuple[VehicleState, VehicleState]:
        return (
            advance_vehicle(scenario.ego_route(self.world), ego, ego_accel, dt),
            advance_vehicle(scenario.intruder_route(self.world), intruder, intruder_accel, dt),
        )

    def reached_destination(self, scenario: Scenario, ego_xy: np.ndarray, min_distance: float) -> bool:
        return self.world.on_branch(scenario.ego_destination, float(ego_xy[0]), float(ego_xy[1]), min_distance)

    def run_simulation(
        self,
        scenario: Scenario,
        s0: InitialState,
        eps: np.ndarray,
        ego_policy: EgoPolicy | None = None,
        start_t: int = 0,
    ) -> SimOutcome:
        """
        Run the closed loop from ``start_t`` to the horizon.

        Args:
            scenario: Routes and intruder exponent.
            s0: Vehicle states at ``start_t``.
            eps: (horizon - start_t, 4) observation errors.
            ego_policy: Ego controller; the IDM policy when omitted.
            start_t: First action step.

        Returns:
            SimOutcome: ``horizon - start_t + 1`` snapshots; snapshots after a
            collision are frozen copies.
        """
        lo, hi = self.idm.intruder_delta_range
        if not lo <= scenario.intruder_idm_delta <= hi:
            raise SimulationError(
                f"intruder_idm_delta {scenario.intruder_idm_delta} outside the configured range [{lo}, {hi}]"
            )
        steps = self.horizon - start_t
        eps = np.asarray(eps, dtype=float).reshape(-1, 4) if np.size(eps) else np.zeros((0, 4))
        if steps < 0 or eps.shape != (steps, 4):
            raise SimulationError(
                f"Expected {max(steps, 0)} noise entries for start_t={start_t}, got shape {eps.shape}"
            )
        policy = ego_policy if ego_policy is not None else IdmEgoPolicy(self, scenario)
        ego, intruder = s0.ego, s0.intruder
        snapshots = [np.concatenate([ego.as_array(), intruder.as_array()])]
        collided = separations(snapshots[0])[0] <= self.collision_radius_sum
        for i in range(steps):
            if collided:
                snapshots.append(snapshots[-1].copy())
                continue
            t = start_t + i
            observation = observe(intruder, eps[i])
            ego_accel = policy(t, ego, observation)
            if not np.all(np.isfinite(ego_accel)):
                raise SimulationError(
                    f"Ego policy returned non-finite acceleration {ego_accel} at t={t} "
                    f"(ego {ego.as_array()}, observation {observation})"
                )
            intruder_accel = self.intruder_acceleration(scenario, ego, intruder)
            ego, intruder = self.step(scenario, ego, intruder, ego_accel, intruder_accel)
            snapshots.append(np.concatenate([ego.as_array(), intruder.as_array()]))
            collided = separations(snapshots[-1])[0] <= self.collision_radius_sum
        trajectory = np.vstack(snapshots)
        rho = robustness(trajectory, self.collision_radius_sum)
        return SimOutcome(
            spawn=scenario.intruder_spawn,
            trajectory=trajectory,
            robustness=rho,
            collided=rho == 0.0,
            scenario=scenario,
            start_t=start_t,
        )


def far_intruder(simulator: Simulator, scenario: Scenario, speed: float = 0.0) -> VehicleState:
    """An intruder parked so far up its approach that it never interacts."""
    route = scenario.intruder_route(simulator.world)
    distance = 1e6 * simulator.world.branch_length
    point = route.point_at(-distance)
    velocity = speed * route.tangent_at(-distance)
    return VehicleState(
        x=float(point[0]), y=float(point[1]), vx=float(velocity[0]), vy=float(velocity[1]), route_progress=-distance
    )


__all__ = [
    "EGO_SPAWN",
    "EgoPolicy",
    "IdmEgoPolicy",
    "Simulator",
    "advance_vehicle",
    "far_intruder",
    "observe",
    "robustness",
    "separations",
]
