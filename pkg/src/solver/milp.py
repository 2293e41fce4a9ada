# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Best-first branch and bound over binary variables.

Every node is an LP relaxation with some binaries fixed. Nodes are explored in
order of their relaxation bound (ties by creation order), branching on the
most fractional binary (ties by lowest index).
"""

import heapq
import logging
from dataclasses import dataclass

import numpy as np

from .lp import LinearProgram, SolveResult, SolveStatus, solve_lp

logger = logging.getLogger(__name__)

NODE_LIMIT = 10_000
INTEGRALITY_TOL = 1e-6
INCUMBENT_TOL = 1e-7


@dataclass(frozen=True)
class MilpProblem:
    lp: LinearProgram
    integer: tuple[int, ...]

    def __post_init__(self) -> None:
        integer = tuple(sorted({int(i) for i in self.integer}))
        for i in integer:
            if not 0 <= i < self.lp.num_vars:
                raise ValueError(f"Integer index {i} outside 0..{self.lp.num_vars - 1}")
            if self.lp.lower[i] < 0.0 or self.lp.upper[i] > 1.0:
                raise ValueError(f"Integer variable {i} must be binary (bounds within [0, 1])")
        object.__setattr__(self, "integer", integer)

    def is_integral(self, x: np.ndarray, tol: float = INTEGRALITY_TOL) -> bool:
        values = np.asarray(x)[list(self.integer)]
        return bool(np.all(np.abs(values - np.round(values)) <= tol))


def _polish(problem: MilpProblem, x: np.ndarray) -> SolveResult | None:
    """Re-solve with binaries fixed to their rounded values; None when they already are exactly 0/1."""
    index = list(problem.integer)
    fixed = np.round(x[index])
    if np.array_equal(fixed, x[index]):
        return None
    lower, upper = problem.lp.lower.copy(), problem.lp.upper.copy()
    lower[index], upper[index] = fixed, fixed
    result = solve_lp(problem.lp.with_bounds(lower, upper))
    return result if result.optimal else None


def _branch_variable(problem: MilpProblem, x: np.ndarray) -> int | None:
    best, best_distance = None, 0.5 + 1.0
    for i in problem.integer:
        frac = x[i] - np.floor(x[i])
        if min(frac, 1.0 - frac) <= INTEGRALITY_TOL:
            continue
        distance = abs(frac - 0.5)
        if distance < best_distance - 1e-15:
            best, best_distance = i, distance
    return best


def validate_incumbent(problem: MilpProblem, x: np.ndarray) -> float | None:
    """Objective of ``x`` if it is integral and feasible, else None."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (problem.lp.num_vars,) or not np.all(np.isfinite(x)):
        return None
    if not problem.is_integral(x) or problem.lp.violation(x) > INCUMBENT_TOL:
        return None
    return problem.lp.value(x)


def solve_milp(
    problem: MilpProblem,
    node_limit: int = NODE_LIMIT,
    incumbent: np.ndarray | None = None,
    relative_gap: float = 0.0,
) -> SolveResult:
    """
    Solve a binary MILP.

    Args:
        problem: LP data plus the indices of binary variables.
        node_limit: Maximum number of LP relaxations solved.
        incumbent: Optional feasible integral solution used for early pruning;
            ignored (with a warning) if it is not feasible.
        relative_gap: Prune nodes whose bound improves on the incumbent by less
            than this fraction of the incumbent's magnitude.

    Returns:
        SolveResult with ``status`` Optimal, Infeasible, Unbounded or
        IterationLimit (best incumbent, if any, when the node cap is reached),
        ``nodes`` solved and the best remaining ``bound``.
    """
    lp = problem.lp
    sign = 1.0 if lp.maximize else -1.0
    best_x: np.ndarray | None = None
    best_value = -np.inf
    if incumbent is not None:
        value = validate_incumbent(problem, incumbent)
        if value is None:
            logger.warning("Ignoring infeasible or fractional MILP incumbent")
        else:
            best_x, best_value = np.asarray(incumbent, dtype=np.float64).copy(), sign * value

    def prunable(bound: float) -> bool:
        if best_x is None:
            return False
        return bound <= best_value + relative_gap * max(1.0, abs(best_value)) + 1e-9

    nodes = 0
    iterations = 0
    limited = False
    inexact = False
    root = solve_lp(lp)
    nodes += 1
    iterations += root.iterations
    if root.status is SolveStatus.UNBOUNDED:
        return SolveResult(SolveStatus.UNBOUNDED, nodes=nodes, iterations=iterations)
    if root.status is SolveStatus.ITERATION_LIMIT:
        objective = None if best_x is None else lp.value(best_x)
        return SolveResult(SolveStatus.ITERATION_LIMIT, best_x, objective, iterations, nodes)
    heap: list[tuple[float, int, np.ndarray, np.ndarray, np.ndarray]] = []
    counter = 0
    if root.optimal:
        root_bound = sign * root.objective  # type: ignore[operator]
        heapq.heappush(heap, (-root_bound, counter, lp.lower.copy(), lp.upper.copy(), root.x))  # type: ignore[arg-type]

    while heap:
        neg_bound, _, lower, upper, x = heapq.heappop(heap)
        bound = -neg_bound
        if prunable(bound):
            continue
        var = _branch_variable(problem, x)
        if var is None:
            polished = _polish(problem, x) if problem.integer else None
            candidate = polished.x if polished is not None else x
            value = sign * lp.value(candidate)  # type: ignore[arg-type]
            if value > best_value:
                best_x, best_value = candidate, value
                logger.debug(f"New MILP incumbent {sign * value:.6g} after {nodes} nodes")
            continue
        for fixed in (0.0, 1.0):
            if nodes >= node_limit:
                limited = True
                break
            child_lower, child_upper = lower.copy(), upper.copy()
            child_lower[var] = child_upper[var] = fixed
            child = solve_lp(lp.with_bounds(child_lower, child_upper))
            nodes += 1
            iterations += child.iterations
            if child.status is SolveStatus.ITERATION_LIMIT:
                inexact = True
                continue
            if not child.optimal:
                continue
            child_bound = sign * child.objective  # type: ignore[operator]
            if prunable(child_bound):
                continue
            counter += 1
            heapq.heappush(heap, (-child_bound, counter, child_lower, child_upper, child.x))  # type: ignore[arg-type]
        if limited:
            break

    remaining = max([-entry[0] for entry in heap], default=best_value)
    if limited:
        remaining = max(remaining, bound)
    bound = sign * max(remaining, best_value) if np.isfinite(max(remaining, best_value)) else None
    if limited or inexact:
        reason = "the node limit" if limited else "an LP iteration limit"
        logger.warning(f"MILP stopped by {reason} after {nodes} nodes; returning best incumbent")
        objective = lp.value(best_x) if best_x is not None else None
        return SolveResult(SolveStatus.ITERATION_LIMIT, best_x, objective, iterations, nodes, bound)
    if best_x is None:
        return SolveResult(SolveStatus.INFEASIBLE, iterations=iterations, nodes=nodes)
    return SolveResult(SolveStatus.OPTIMAL, best_x, lp.value(best_x), iterations, nodes, bound)
