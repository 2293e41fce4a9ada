# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Max-min separation planning as a binary MILP.

The ego is a point mass with unit steps, p' = p + v + a/2 and v' = v + a. The
objective maximises m subject to m <= |x - f_x| + |y - f_y| for every future
step and failure sample. Each absolute-value sum is split over its four sign
orthants; two binaries per term select the active orthant and big-M relaxes the
other three.
"""

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from ..solver.lp import LinearProgram, RowSense, SolveStatus
from ..solver.milp import NODE_LIMIT, MilpProblem, solve_milp
from .failures import FailureSampleSet
from .regions import PlanRegions, box_contains

logger = logging.getLogger(__name__)

HEURISTIC_ROUNDS = 5
HEURISTIC_NODE_LIMIT = 50
AUDIT_TOLERANCE = 1e-6


@dataclass(frozen=True)
class PlanLayout:
    """Column indices of the plan variables."""

    horizon: int
    samples: int
    legs: int

    def position(self, k: int, axis: int) -> int:
        return 2 * (k - 1) + axis

    def velocity(self, k: int, axis: int) -> int:
        return 2 * self.horizon + 2 * (k - 1) + axis

    def acceleration(self, k: int, axis: int) -> int:
        return 4 * self.horizon + 2 * k + axis

    @property
    def margin(self) -> int:
        return 6 * self.horizon

    def speed(self, k: int, axis: int) -> int:
        return 6 * self.horizon + 1 + 2 * (k - 1) + axis

    def orthant(self, k: int, j: int, axis: int) -> int:
        return 8 * self.horizon + 1 + 2 * ((k - 1) * self.samples + j) + axis

    def leg(self, k: int) -> int:
        return 8 * self.horizon + 1 + 2 * self.horizon * self.samples + (k - 1)

    @property
    def num_vars(self) -> int:
        return 8 * self.horizon + 1 + 2 * self.horizon * self.samples + (self.horizon if self.legs == 2 else 0)

    def orthant_indices(self) -> list[int]:
        return [
            self.orthant(k, j, axis)
            for k in range(1, self.horizon + 1)
            for j in range(self.samples)
            for axis in (0, 1)
        ]

    def leg_indices(self) -> list[int]:
        return [self.leg(k) for k in range(1, self.horizon + 1)] if self.legs == 2 else []

    def block(self, first: int, count: int) -> slice:
        return slice(first, first + count)


@dataclass(frozen=True)
class PlanMilp:
    problem: MilpProblem
    layout: PlanLayout
    big_m: float
    failure_positions: np.ndarray


def _failure_positions(fset: FailureSampleSet, t: int, horizon: int) -> np.ndarray:
    """(horizon, N, 2) failure positions for steps t+1..t+horizon."""
    return np.stack([fset.positions_at(t + k) for k in range(1, horizon + 1)])


def clip_failures(regions: PlanRegions, failure_positions: np.ndarray, diameter: float) -> np.ndarray:
    """
    Pull failure positions into the lane box grown by ``diameter``.

    Orthant signs relative to any lane point are unchanged and L1 distances to
    lane points can only shrink, so clipped samples never bind below ``diameter``.
    """
    xmin, xmax, ymin, ymax = regions.bounding_box
    clipped = failure_positions.copy()
    clipped[..., 0] = np.clip(clipped[..., 0], xmin - diameter, xmax + diameter)
    clipped[..., 1] = np.clip(clipped[..., 1], ymin - diameter, ymax + diameter)
    return clipped


def default_big_m(regions: PlanRegions, failure_positions: np.ndarray, diameter: float) -> float:
    """The map diameter, or twice the largest L1 distance from the lane box to a failure point if larger."""
    corners = regions.corners()
    points = failure_positions.reshape(-1, 2)
    if points.size == 0:
        return diameter
    l1 = np.abs(corners[:, None, :] - points[None, :, :]).sum(axis=2)
    return float(max(diameter, 2.0 * l1.max()))


class _Rows:
    def __init__(self, num_vars: int) -> None:
        self.num_vars = num_vars
        self.rows: list[np.ndarray] = []
        self.rhs: list[float] = []
        self.senses: list[RowSense] = []

    def add(self, coefficients: dict[int, float], sense: RowSense, rhs: float) -> None:
        row = np.zeros(self.num_vars)
        for index, value in coefficients.items():
            row[index] += value
        self.rows.append(row)
        self.senses.append(sense)
        self.rhs.append(float(rhs))

    def matrix(self) -> np.ndarray:
        return np.vstack(self.rows) if self.rows else np.zeros((0, self.num_vars))


def build_plan_milp(
    o_t: np.ndarray,
    fset: FailureSampleSet,
    t: int,
    regions: PlanRegions,
    horizon: int = 23,
    diameter: float = 2.16,
    big_m: float | None = None,
) -> PlanMilp:
    """
    Build the plan MILP for the ego state in ``o_t``.

    Args:
        o_t: 8-vector; the first four entries are the ego state at ``t``.
        fset: Failure samples covering ``t``..``horizon``.
        t: Current timestep; the plan has ``horizon - t`` actions.
        regions: Lane, terminal and motion limits of the ego route.
        horizon: Last timestep of the episode.
        diameter: Map diameter, the smallest big-M used.
        big_m: Explicit big-M override.

    Returns:
        PlanMilp: The problem plus its column layout.
    """
    steps = horizon - t
    if steps < 1:
        raise ValueError(f"Nothing left to plan at t={t} (horizon {horizon})")
    if len(fset) == 0:
        raise ValueError("Cannot plan against an empty failure set")
    if fset.start_t > t or fset.end_t < horizon:
        raise ValueError(f"Failure set spans {fset.start_t}..{fset.end_t}, need {t}..{horizon}")
    if len(regions.lanes) not in (1, 2):
        raise ValueError(f"Routes with {len(regions.lanes)} legs are not supported")
    ego = np.asarray(o_t, dtype=float)[:4]
    failures = clip_failures(regions, _failure_positions(fset, t, steps), diameter)
    layout = PlanLayout(horizon=steps, samples=len(fset), legs=len(regions.lanes))
    M = float(big_m) if big_m is not None else default_big_m(regions, failures, diameter)
    n = layout.num_vars

    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    xmin, xmax, ymin, ymax = regions.lanes[0] if layout.legs == 1 else regions.bounding_box
    for k in range(1, steps + 1):
        lower[layout.position(k, 0)], upper[layout.position(k, 0)] = xmin, xmax
        lower[layout.position(k, 1)], upper[layout.position(k, 1)] = ymin, ymax
        for axis in (0, 1):
            lower[layout.velocity(k, axis)], upper[layout.velocity(k, axis)] = regions.velocity[axis]
            lower[layout.acceleration(k - 1, axis)], upper[layout.acceleration(k - 1, axis)] = (
                regions.acceleration[axis]
            )
            lower[layout.speed(k, axis)] = 0.0
    lower[layout.margin] = 0.0
    binaries = layout.orthant_indices() + layout.leg_indices()
    lower[binaries], upper[binaries] = 0.0, 1.0

    rows = _Rows(n)
    for k in range(steps):
        for axis in (0, 1):
            p_next, v_next = layout.position(k + 1, axis), layout.velocity(k + 1, axis)
            a = layout.acceleration(k, axis)
            if k == 0:
                rows.add({p_next: 1.0, a: -0.5}, RowSense.EQ, ego[axis] + ego[2 + axis])
                rows.add({v_next: 1.0, a: -1.0}, RowSense.EQ, ego[2 + axis])
            else:
                p, v = layout.position(k, axis), layout.velocity(k, axis)
                rows.add({p_next: 1.0, p: -1.0, v: -1.0, a: -0.5}, RowSense.EQ, 0.0)
                rows.add({v_next: 1.0, v: -1.0, a: -1.0}, RowSense.EQ, 0.0)

    for k in range(1, steps + 1):
        for axis in (0, 1):
            u, v = layout.speed(k, axis), layout.velocity(k, axis)
            rows.add({u: 1.0, v: -1.0}, RowSense.GE, 0.0)
            rows.add({u: 1.0, v: 1.0}, RowSense.GE, 0.0)
    for axis in (0, 1):
        rows.add(
            {layout.speed(k, axis): 1.0 for k in range(1, steps + 1)},
            RowSense.LE,
            regions.mean_speed[axis] * steps,
        )

    if layout.legs == 2:
        first, second = regions.lanes
        for k in range(1, steps + 1):
            leg = layout.leg(k)
            for axis in (0, 1):
                p = layout.position(k, axis)
                lo0, hi0 = first[2 * axis], first[2 * axis + 1]
                lo1, hi1 = second[2 * axis], second[2 * axis + 1]
                rows.add({p: 1.0, leg: M}, RowSense.GE, lo0)
                rows.add({p: 1.0, leg: -M}, RowSense.LE, hi0)
                rows.add({p: 1.0, leg: -M}, RowSense.GE, lo1 - M)
                rows.add({p: 1.0, leg: M}, RowSense.LE, hi1 + M)
            if k < steps:
                rows.add({leg: 1.0, layout.leg(k + 1): -1.0}, RowSense.LE, 0.0)

    txmin, txmax, tymin, tymax = regions.terminal
    px, py = layout.position(steps, 0), layout.position(steps, 1)
    rows.add({px: 1.0}, RowSense.GE, txmin)
    rows.add({px: 1.0}, RowSense.LE, txmax)
    rows.add({py: 1.0}, RowSense.GE, tymin)
    rows.add({py: 1.0}, RowSense.LE, tymax)

    m = layout.margin
    for k in range(1, steps + 1):
        px, py = layout.position(k, 0), layout.position(k, 1)
        for j in range(layout.samples):
            fx, fy = failures[k - 1, j]
            bx, by = layout.orthant(k, j, 0), layout.orthant(k, j, 1)
            for sx, sy in itertools.product((1.0, -1.0), repeat=2):
                rows.add(
                    {m: 1.0, px: -sx, py: -sy, bx: sx * M, by: sy * M},
                    RowSense.LE,
                    -sx * fx - sy * fy + M * (sx > 0) + M * (sy > 0),
                )

    objective = np.zeros(n)
    objective[m] = 1.0
    lp = LinearProgram(objective, rows.matrix(), np.array(rows.rhs), tuple(rows.senses), lower, upper, maximize=True)
    logger.debug(f"Plan MILP at t={t}: {n} variables, {lp.num_rows} rows, {len(binaries)} binaries, M={M:.3f}")
    return PlanMilp(MilpProblem(lp, tuple(binaries)), layout, M, failures)


def orthant_choice(positions: np.ndarray, failure_positions: np.ndarray) -> np.ndarray:
    """(H, N, 2) binaries selecting the orthant each ego position lies in relative to each failure."""
    return (positions[:, None, :] >= failure_positions).astype(float)


def heuristic_incumbent(
    plan: PlanMilp, seed_positions: np.ndarray, rounds: int = HEURISTIC_ROUNDS
) -> np.ndarray | None:
    """
    Fixed-point search over orthant choices.

    Orthants are fixed from ``seed_positions``, the remaining problem (only
    leg binaries stay free) is solved, and orthants are re-derived from the
    resulting waypoints until they stop changing.
    """
    lp, layout = plan.problem.lp, plan.layout
    orthants = np.array(layout.orthant_indices())
    positions = np.asarray(seed_positions, dtype=float).reshape(layout.horizon, 2)
    best, best_value = None, -np.inf
    choice = orthant_choice(positions, plan.failure_positions).reshape(-1)
    for _ in range(rounds):
        lower, upper = lp.lower.copy(), lp.upper.copy()
        lower[orthants] = upper[orthants] = choice
        fixed = MilpProblem(lp.with_bounds(lower, upper), plan.problem.integer)
        result = solve_milp(fixed, node_limit=HEURISTIC_NODE_LIMIT)
        if result.x is None:
            break
        if result.objective is not None and result.objective > best_value:
            best, best_value = result.x, result.objective
        positions = result.x[layout.block(0, 2 * layout.horizon)].reshape(-1, 2)
        next_choice = orthant_choice(positions, plan.failure_positions).reshape(-1)
        if np.array_equal(next_choice, choice):
            break
        choice = next_choice
    if best is not None:
        logger.debug(f"Heuristic plan incumbent with margin {best_value:.4f}")
    return best


@dataclass(frozen=True)
class PlanSolution:
    status: SolveStatus
    start_t: int
    actions: np.ndarray
    waypoints: np.ndarray
    velocities: np.ndarray
    objective: float | None
    margin: float | None = None
    nodes: int = 0

    @property
    def feasible(self) -> bool:
        return self.actions.shape[0] > 0

    def action_at(self, t: int) -> np.ndarray | None:
        """Planned acceleration for timestep ``t``, if the plan covers it."""
        index = t - self.start_t
        if self.feasible and 0 <= index < self.actions.shape[0]:
            return self.actions[index]
        return None


def min_separation(waypoints: np.ndarray, failure_positions: np.ndarray) -> float:
    return float(np.abs(waypoints[:, None, :] - failure_positions).sum(axis=2).min())


def solve_plan(
    o_t: np.ndarray,
    fset: FailureSampleSet,
    t: int,
    regions: PlanRegions,
    horizon: int = 23,
    diameter: float = 2.16,
    node_limit: int = NODE_LIMIT,
    big_m: float | None = None,
    seed_positions: np.ndarray | None = None,
) -> PlanSolution:
    """
    Build and solve the plan MILP, seeding branch and bound with the heuristic incumbent.

    Returns:
        PlanSolution: ``feasible`` is False (and arrays empty) when no plan exists
        or none was found within the node limit.
    """
    plan = build_plan_milp(o_t, fset, t, regions, horizon, diameter, big_m)
    layout = plan.layout
    if seed_positions is None:
        seed_positions = np.tile(np.asarray(o_t, dtype=float)[:2], (layout.horizon, 1))
    incumbent = heuristic_incumbent(plan, seed_positions)
    result = solve_milp(plan.problem, node_limit=node_limit, incumbent=incumbent)
    empty = np.zeros((0, 2))
    if result.x is None:
        logger.warning(f"No feasible plan at t={t} (status {result.status.value})")
        return PlanSolution(result.status, t, empty, empty, empty, None, nodes=result.nodes)
    x = result.x
    steps = layout.horizon
    waypoints = x[layout.block(layout.position(1, 0), 2 * steps)].reshape(steps, 2)
    velocities = x[layout.block(layout.velocity(1, 0), 2 * steps)].reshape(steps, 2)
    actions = x[layout.block(layout.acceleration(0, 0), 2 * steps)].reshape(steps, 2)
    objective = min_separation(waypoints, _failure_positions(fset, t, steps))
    logger.debug(f"Plan at t={t}: {result.status.value}, margin {objective:.4f}, {result.nodes} nodes")
    return PlanSolution(
        result.status, t, actions, waypoints, velocities, objective, float(x[layout.margin]), result.nodes
    )


def audit_plan(
    solution: PlanSolution,
    o_t: np.ndarray,
    fset: FailureSampleSet,
    regions: PlanRegions,
    tol: float = AUDIT_TOLERANCE,
) -> list[str]:
    """
    Re-check a plan against its constraints without the MILP matrix.

    Returns:
        list[str]: One message per violated constraint; empty when the plan is valid.
    """
    problems: list[str] = []
    if not solution.feasible:
        return ["plan is empty"]
    ego = np.asarray(o_t, dtype=float)[:4]
    position, velocity = ego[:2].copy(), ego[2:4].copy()
    steps = solution.actions.shape[0]
    for k in range(steps):
        a = solution.actions[k]
        position = position + velocity + 0.5 * a
        velocity = velocity + a
        if np.max(np.abs(position - solution.waypoints[k])) > tol:
            problems.append(f"step {k + 1}: waypoint does not follow the dynamics")
        if np.max(np.abs(velocity - solution.velocities[k])) > tol:
            problems.append(f"step {k + 1}: velocity does not follow the dynamics")
        for axis, name in ((0, "x"), (1, "y")):
            lo, hi = regions.velocity[axis]
            if not lo - tol <= solution.velocities[k, axis] <= hi + tol:
                problems.append(f"step {k + 1}: {name} velocity outside [{lo}, {hi}]")
            lo, hi = regions.acceleration[axis]
            if not lo - tol <= a[axis] <= hi + tol:
                problems.append(f"step {k}: {name} acceleration outside [{lo}, {hi}]")
        if not regions.in_lane(solution.waypoints[k], tol):
            problems.append(f"step {k + 1}: waypoint outside the lane region")
    for axis, name in ((0, "x"), (1, "y")):
        mean = float(np.mean(np.abs(solution.velocities[:, axis])))
        if mean > regions.mean_speed[axis] + tol:
            problems.append(f"mean |{name} velocity| {mean:.4f} above {regions.mean_speed[axis]}")
    if not box_contains(regions.terminal, solution.waypoints[-1], tol):
        problems.append("final waypoint outside the terminal region")
    failures = _failure_positions(fset, solution.start_t, steps)
    separations = np.abs(solution.waypoints[:, None, :] - failures).sum(axis=2)
    for name, value in (("margin", solution.margin), ("objective", solution.objective)):
        if value is not None and value > float(separations.min()) + tol:
            problems.append(f"{name} {value:.6f} exceeds a separation term")
    return problems
