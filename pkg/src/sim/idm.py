# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Intelligent Driver Model and the leader-selection rule used by both vehicles.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .geometry import Conflict, Route

logger = logging.getLogger(__name__)

_MIN_SPEED = 1e-6


@dataclass(frozen=True)
class IDMParams:
    desired_speed: float
    a_max: float
    comfortable_decel: float
    hard_decel: float
    min_gap: float
    time_headway: float
    delta: float

    @classmethod
    def from_config(cls, config, delta: float) -> "IDMParams":
        return cls(
            desired_speed=config.desired_speed,
            a_max=config.a_max,
            comfortable_decel=config.comfortable_decel,
            hard_decel=config.hard_decel,
            min_gap=config.min_gap,
            time_headway=config.time_headway,
            delta=delta,
        )


def idm_acceleration(v: float, gap: float, dv: float, params: IDMParams) -> float:
    """
    Treiber's IDM acceleration, clamped to [-hard_decel, a_max].

    Args:
        v: Own speed (>= 0).
        gap: Bumper gap to the leader; ``math.inf`` for free road.
        dv: Closing speed (own speed minus leader speed along the route).
        params: Model parameters including the desired speed and exponent.

    Raises:
        ValueError: on non-finite speed/closing speed, NaN gap or negative speed.
    """
    if not (math.isfinite(v) and math.isfinite(dv)) or math.isnan(gap):
        raise ValueError(f"IDM inputs must be finite (v={v}, gap={gap}, dv={dv})")
    if v < 0:
        raise ValueError(f"IDM speed must be non-negative, got: {v}")
    if gap <= 0:
        return -params.hard_decel
    free_term = (v / params.desired_speed) ** params.delta
    interaction = 0.0
    if math.isfinite(gap):
        desired_gap = (
            params.min_gap
            + v * params.time_headway
            + v * dv / (2.0 * math.sqrt(params.a_max * params.comfortable_decel))
        )
        interaction = (max(desired_gap, 0.0) / gap) ** 2
    accel = params.a_max * (1.0 - free_term - interaction)
    return min(max(accel, -params.hard_decel), params.a_max)


def leader_inputs(
    own_route: Route,
    own_progress: float,
    own_speed: float,
    other_route: Route,
    other_position: np.ndarray,
    other_velocity: np.ndarray,
    conflict: Conflict | None,
    clearance: float,
    yield_on_tie: bool,
) -> tuple[float, float]:
    """
    Gap and closing speed seen by one vehicle.

    Car following applies when the other vehicle projects onto our route ahead
    of us within half a lane width. Otherwise the later arrival at the first
    shared point stops short of it by ``clearance``. Everything else is free road.

    Returns:
        (gap, dv): gap is ``math.inf`` for free road.
    """
    other_on_own, lateral = own_route.project(float(other_position[0]), float(other_position[1]))
    if lateral <= own_route.lane_width / 2.0 + 1e-12 and other_on_own > own_progress:
        along = float(np.dot(other_velocity, own_route.tangent_at(other_on_own)))
        return other_on_own - own_progress - clearance, own_speed - along

    if conflict is None:
        return math.inf, 0.0

    other_progress, _ = other_route.project(float(other_position[0]), float(other_position[1]))
    own_remaining = conflict.own_progress - own_progress
    other_remaining = conflict.other_progress - other_progress
    if own_remaining < 0.0 or other_remaining < -clearance:
        return math.inf, 0.0

    other_speed = max(0.0, float(np.dot(other_velocity, other_route.tangent_at(other_progress))))
    own_time = own_remaining / max(own_speed, _MIN_SPEED)
    other_time = max(other_remaining, 0.0) / max(other_speed, _MIN_SPEED)
    if other_time < own_time or (other_time == own_time and yield_on_tie):
        return own_remaining - clearance, own_speed
    return math.inf, 0.0
