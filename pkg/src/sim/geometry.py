# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Four-way intersection geometry: branches, piecewise-linear routes and conflicts.

The intersection centre is the origin; each branch carries two lanes of width
``lane_width`` with right-hand traffic. Routes are polylines made of a straight
approach, at most one corner vertex and a straight exit. The exit leg is open
ended: progress beyond the last vertex continues along the final segment.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

logger = logging.getLogger(__name__)


class GeometryError(ValueError):
    """Raised for invalid world dimensions or unknown routes."""

    pass


class Branch(IntEnum):
    EAST = 0
    WEST = 1
    SOUTH = 2
    NORTH = 3

    @classmethod
    def parse(cls, name: "str | int | Branch") -> "Branch":
        if isinstance(name, Branch):
            return name
        if isinstance(name, int):
            return cls(name)
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise GeometryError(f"Unknown branch: {name}") from None

    @property
    def label(self) -> str:
        return self.name.lower()


_OUTWARD = {
    Branch.EAST: (1.0, 0.0),
    Branch.WEST: (-1.0, 0.0),
    Branch.SOUTH: (0.0, -1.0),
    Branch.NORTH: (0.0, 1.0),
}


def outward(branch: Branch) -> np.ndarray:
    """Unit vector pointing from the centre along the branch."""
    return np.array(_OUTWARD[branch])


def _right_of(direction: np.ndarray) -> np.ndarray:
    return np.array([direction[1], -direction[0]])


@dataclass(frozen=True)
class Conflict:
    """First shared point of two routes, as arc lengths on each."""

    own_progress: float
    other_progress: float
    point: tuple[float, float]


@dataclass
class Route:
    spawn: Branch
    destination: Branch
    vertices: np.ndarray
    lane_width: float
    branch_length: float
    cumulative: np.ndarray = field(init=False)
    directions: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        deltas = np.diff(self.vertices, axis=0)
        lengths = np.hypot(deltas[:, 0], deltas[:, 1])
        self.cumulative = np.concatenate([[0.0], np.cumsum(lengths)])
        self.directions = deltas / lengths[:, None]

    @property
    def length(self) -> float:
        return float(self.cumulative[-1])

    @property
    def is_straight(self) -> bool:
        return len(self.vertices) == 2

    @property
    def entry_progress(self) -> float:
        """Arc length at which the route enters the central box |x|,|y| <= lane_width."""
        return self.branch_length - self.lane_width

    @property
    def exit_progress(self) -> float:
        return self.length - (self.branch_length - self.lane_width)

    def _segment(self, progress: float) -> int:
        index = int(np.searchsorted(self.cumulative, progress, side="right")) - 1
        return min(max(index, 0), len(self.directions) - 1)

    def point_at(self, progress: float) -> np.ndarray:
        index = self._segment(progress)
        return self.vertices[index] + (progress - self.cumulative[index]) * self.directions[index]

    def tangent_at(self, progress: float) -> np.ndarray:
        return self.directions[self._segment(progress)].copy()

    def project(self, x: float, y: float) -> tuple[float, float]:
        """
        Closest point on the route.

        Returns:
            (progress, lateral distance). The first segment extends backwards and
            the last one forwards without bound.
        """
        point = np.array([x, y], dtype=float)
        best_progress, best_distance = 0.0, math.inf
        last = len(self.directions) - 1
        for index, direction in enumerate(self.directions):
            start = self.vertices[index]
            seg_len = self.cumulative[index + 1] - self.cumulative[index]
            along = float(np.dot(point - start, direction))
            lo = -math.inf if index == 0 else 0.0
            hi = math.inf if index == last else seg_len
            along = min(max(along, lo), hi)
            distance = float(np.hypot(*(point - (start + along * direction))))
            if distance < best_distance - 1e-12:
                best_progress = float(self.cumulative[index] + along)
                best_distance = distance
        return best_progress, best_distance

    def leg_rectangles(self) -> list[tuple[float, float, float, float]]:
        """Axis-aligned lane rectangles (xmin, xmax, ymin, ymax), one per leg, clipped to the map."""
        half = self.lane_width / 2.0
        limit = self.branch_length
        boxes = []
        for a, b in zip(self.vertices[:-1], self.vertices[1:], strict=True):
            xmin, xmax = sorted((a[0], b[0]))
            ymin, ymax = sorted((a[1], b[1]))
            boxes.append(
                (
                    max(xmin - half, -limit),
                    min(xmax + half, limit),
                    max(ymin - half, -limit),
                    min(ymax + half, limit),
                )
            )
        return boxes


def distance_to_intersection(route: Route, progress: float) -> float:
    return max(0.0, route.entry_progress - progress)


def distance_past_intersection(route: Route, progress: float) -> float:
    return max(0.0, progress - route.exit_progress)


def _segment_hits(
    p: np.ndarray, d: np.ndarray, p_len: float, q: np.ndarray, e: np.ndarray, q_len: float
) -> tuple[float, float] | None:
    """Earliest point of segment p+t*d (t in [0,p_len]) on segment q+u*e; returns (t, u)."""
    cross = d[0] * e[1] - d[1] * e[0]
    offset = q - p
    tol = 1e-12
    if abs(cross) > tol:
        t = (offset[0] * e[1] - offset[1] * e[0]) / cross
        u = (offset[0] * d[1] - offset[1] * d[0]) / cross
        if -tol <= t <= p_len + tol and -tol <= u <= q_len + tol:
            return min(max(t, 0.0), p_len), min(max(u, 0.0), q_len)
        return None
    # parallel: overlap only if collinear
    if abs(offset[0] * d[1] - offset[1] * d[0]) > 1e-9:
        return None
    q_start = float(np.dot(offset, d))
    q_end = float(np.dot(q + q_len * e - p, d))
    lo, hi = max(0.0, min(q_start, q_end)), min(p_len, max(q_start, q_end))
    if lo > hi + tol:
        return None
    point = p + lo * d
    return lo, float(np.dot(point - q, e))


def find_conflict(own: Route, other: Route) -> Conflict | None:
    """First point along ``own`` that also lies on ``other``."""
    best: Conflict | None = None
    for i, d in enumerate(own.directions):
        p_len = own.cumulative[i + 1] - own.cumulative[i]
        for j, e in enumerate(other.directions):
            q_len = other.cumulative[j + 1] - other.cumulative[j]
            hit = _segment_hits(own.vertices[i], d, p_len, other.vertices[j], e, q_len)
            if hit is None:
                continue
            own_progress = float(own.cumulative[i] + hit[0])
            if best is None or own_progress < best.own_progress:
                point = own.vertices[i] + hit[0] * d
                best = Conflict(
                    own_progress=own_progress,
                    other_progress=float(other.cumulative[j] + hit[1]),
                    point=(float(point[0]), float(point[1])),
                )
        if best is not None:
            # later segments of own cannot produce an earlier point
            break
    return best


@dataclass
class WorldGeometry:
    lane_width: float
    branch_length: float
    routes: dict[tuple[Branch, Branch], Route]
    _conflicts: dict[tuple[Branch, Branch, Branch, Branch], Conflict | None] = field(
        default_factory=dict, repr=False
    )

    def route(self, spawn: Branch, destination: Branch) -> Route:
        try:
            return self.routes[(Branch.parse(spawn), Branch.parse(destination))]
        except KeyError:
            raise GeometryError(f"No route from {spawn} to {destination}") from None

    def conflict(self, own: Route, other: Route) -> Conflict | None:
        key = (own.spawn, own.destination, other.spawn, other.destination)
        if key not in self._conflicts:
            self._conflicts[key] = find_conflict(own, other)
        return self._conflicts[key]

    @property
    def diameter(self) -> float:
        return 2.0 * self.branch_length + 4.0 * self.lane_width

    def on_branch(self, branch: Branch, x: float, y: float, min_distance: float) -> bool:
        """Whether (x, y) lies on ``branch``'s roadway at least ``min_distance`` past the central box."""
        axis = outward(branch)
        along = x * axis[0] + y * axis[1]
        across = abs(-x * axis[1] + y * axis[0])
        return along >= self.lane_width + min_distance and across <= self.lane_width


def build_world(lane_width: float = 0.04, branch_length: float = 1.0) -> WorldGeometry:
    """
    Build route polylines for every (spawn, destination) pair.

    Args:
        lane_width: Width of one lane (map units).
        branch_length: Distance from the centre to the end of each branch.

    Returns:
        WorldGeometry: 12 routes keyed by (spawn, destination).
    """
    if not (math.isfinite(lane_width) and lane_width > 0):
        raise GeometryError(f"lane_width must be positive, got: {lane_width}")
    if not (math.isfinite(branch_length) and branch_length > 2 * lane_width):
        raise GeometryError(
            f"branch_length must exceed two lane widths, got: {branch_length}"
        )
    half = lane_width / 2.0
    routes: dict[tuple[Branch, Branch], Route] = {}
    for spawn in Branch:
        u_in = outward(spawn)
        offset_in = half * _right_of(-u_in)
        start = branch_length * u_in + offset_in
        for destination in Branch:
            if destination == spawn:
                continue
            u_out = outward(destination)
            offset_out = half * _right_of(u_out)
            end = branch_length * u_out + offset_out
            if np.allclose(u_out, -u_in):
                vertices = np.array([start, end])
            else:
                if u_in[0] == 0.0:  # vertical approach, horizontal exit
                    corner = np.array([offset_in[0], offset_out[1]])
                else:
                    corner = np.array([offset_out[0], offset_in[1]])
                vertices = np.array([start, corner, end])
            routes[(spawn, destination)] = Route(
                spawn=spawn,
                destination=destination,
                vertices=vertices,
                lane_width=lane_width,
                branch_length=branch_length,
            )
    logger.debug(f"Built world with {len(routes)} routes (lane {lane_width}, branch {branch_length})")
    return WorldGeometry(lane_width=lane_width, branch_length=branch_length, routes=routes)
