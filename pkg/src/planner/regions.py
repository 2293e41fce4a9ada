# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Linear regions and motion limits for the ego plan.
"""

from dataclasses import dataclass

import numpy as np

from ..common.validation import PlannerConfig
from ..sim.geometry import Branch, Route, WorldGeometry, outward

Box = tuple[float, float, float, float]


def box_contains(box: Box, point: np.ndarray, tol: float = 0.0) -> bool:
    xmin, xmax, ymin, ymax = box
    return xmin - tol <= point[0] <= xmax + tol and ymin - tol <= point[1] <= ymax + tol


def terminal_box(world: WorldGeometry, destination: Branch, success_distance: float) -> Box:
    """Cells of ``destination`` at least ``success_distance`` past the central box."""
    axis = outward(destination)
    near = world.lane_width + success_distance
    far = world.branch_length
    across = world.lane_width
    if axis[0] != 0.0:
        xs = sorted((axis[0] * near, axis[0] * far))
        return (xs[0], xs[1], -across, across)
    ys = sorted((axis[1] * near, axis[1] * far))
    return (-across, across, ys[0], ys[1])


def forward_signs(route: Route) -> tuple[int, int]:
    """Sign of the route's net displacement per axis (0 when it has none)."""
    displacement = route.vertices[-1] - route.vertices[0]
    tol = 1e-9 * max(1.0, route.branch_length)
    return tuple(0 if abs(d) <= tol else int(np.sign(d)) for d in displacement)  # type: ignore[return-value]


def signed_interval(sign: int, forward: float, retrograde: float) -> tuple[float, float]:
    if sign > 0:
        return (-retrograde, forward)
    if sign < 0:
        return (-forward, retrograde)
    return (-retrograde, retrograde)


@dataclass(frozen=True)
class PlanRegions:
    lanes: tuple[Box, ...]
    terminal: Box
    forward: tuple[int, int]
    velocity: tuple[tuple[float, float], tuple[float, float]]
    acceleration: tuple[tuple[float, float], tuple[float, float]]
    mean_speed: tuple[float, float]

    @property
    def bounding_box(self) -> Box:
        lanes = np.array(self.lanes)
        return (
            float(lanes[:, 0].min()),
            float(lanes[:, 1].max()),
            float(lanes[:, 2].min()),
            float(lanes[:, 3].max()),
        )

    def corners(self) -> np.ndarray:
        xmin, xmax, ymin, ymax = self.bounding_box
        return np.array([[xmin, ymin], [xmin, ymax], [xmax, ymin], [xmax, ymax]])

    def in_lane(self, point: np.ndarray, tol: float = 0.0) -> bool:
        return any(box_contains(box, point, tol) for box in self.lanes)


def plan_regions(world: WorldGeometry, route: Route, config: PlannerConfig) -> PlanRegions:
    """Lane rectangles, terminal box and per-axis bounds for an ego following ``route``."""
    signs = forward_signs(route)
    velocity = tuple(
        signed_interval(s, config.max_forward_velocity, config.max_retrograde_velocity) for s in signs
    )
    acceleration = (
        signed_interval(signs[0], config.max_forward_accel_x, config.max_retrograde_accel),
        signed_interval(signs[1], config.max_forward_accel_y, config.max_retrograde_accel),
    )
    return PlanRegions(
        lanes=tuple(route.leg_rectangles()),
        terminal=terminal_box(world, route.destination, config.success_distance),
        forward=signs,
        velocity=velocity,  # type: ignore[arg-type]
        acceleration=acceleration,
        mean_speed=(config.max_mean_velocity_x, config.max_mean_velocity_y),
    )
