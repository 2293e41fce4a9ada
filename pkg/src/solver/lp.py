# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Dense two-phase primal simplex for small linear programs.

Variables with finite bounds are shifted to be non-negative (an upper bound
becomes an extra row), variables bounded only above are mirrored, free
variables are split and fixed variables are eliminated. Pricing is Dantzig's
rule until a run of degenerate pivots, after which Bland's rule is used for the
rest of the solve.
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

logger = logging.getLogger(__name__)

MAX_ITERATIONS = 100_000
DEGENERATE_RUN = 50
PIVOT_TOL = 1e-9
FEASIBILITY_TOL = 1e-9


class SolveStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"


class RowSense(str, Enum):
    LE = "<="
    EQ = "="
    GE = ">="


@dataclass(frozen=True)
class LinearProgram:
    """
    Optimise ``objective @ x`` subject to ``matrix @ x (senses) rhs`` and
    ``lower <= x <= upper``. Bounds may be infinite.
    """

    objective: np.ndarray
    matrix: np.ndarray
    rhs: np.ndarray
    senses: tuple[RowSense, ...]
    lower: np.ndarray
    upper: np.ndarray
    maximize: bool = True

    def __post_init__(self) -> None:
        objective = np.asarray(self.objective, dtype=np.float64).reshape(-1)
        n = objective.shape[0]
        matrix = np.asarray(self.matrix, dtype=np.float64).reshape(-1, n)
        rhs = np.asarray(self.rhs, dtype=np.float64).reshape(-1)
        senses = tuple(RowSense(s) for s in self.senses)
        lower = np.asarray(self.lower, dtype=np.float64).reshape(-1)
        upper = np.asarray(self.upper, dtype=np.float64).reshape(-1)
        if matrix.shape[0] != rhs.shape[0] or len(senses) != rhs.shape[0]:
            raise ValueError(
                f"Row count mismatch: matrix {matrix.shape[0]}, rhs {rhs.shape[0]}, senses {len(senses)}"
            )
        if lower.shape != (n,) or upper.shape != (n,):
            raise ValueError(f"Bounds must have {n} entries, got {lower.shape} and {upper.shape}")
        if not (np.all(np.isfinite(objective)) and np.all(np.isfinite(matrix)) and np.all(np.isfinite(rhs))):
            raise ValueError("Objective, matrix and rhs must be finite")
        if np.any(lower > upper) or np.any(lower == np.inf) or np.any(upper == -np.inf):
            raise ValueError("Each variable needs lower <= upper with lower < inf and upper > -inf")
        for name, value in (
            ("objective", objective),
            ("matrix", matrix),
            ("rhs", rhs),
            ("senses", senses),
            ("lower", lower),
            ("upper", upper),
        ):
            object.__setattr__(self, name, value)

    @classmethod
    def build(
        cls,
        objective,
        matrix=None,
        rhs=None,
        senses=None,
        lower=None,
        upper=None,
        maximize: bool = True,
    ) -> "LinearProgram":
        """Convenience constructor: no rows, x >= 0 and all-<= rows by default."""
        objective = np.asarray(objective, dtype=np.float64).reshape(-1)
        n = objective.shape[0]
        matrix = np.zeros((0, n)) if matrix is None else matrix
        rhs = np.zeros(0) if rhs is None else rhs
        rows = np.asarray(rhs).reshape(-1).shape[0]
        return cls(
            objective=objective,
            matrix=matrix,
            rhs=rhs,
            senses=tuple(senses) if senses is not None else (RowSense.LE,) * rows,
            lower=np.zeros(n) if lower is None else lower,
            upper=np.full(n, np.inf) if upper is None else upper,
            maximize=maximize,
        )

    @property
    def num_vars(self) -> int:
        return self.objective.shape[0]

    @property
    def num_rows(self) -> int:
        return self.rhs.shape[0]

    def with_bounds(self, lower: np.ndarray, upper: np.ndarray) -> "LinearProgram":
        return replace(self, lower=lower, upper=upper)

    def value(self, x: np.ndarray) -> float:
        return float(self.objective @ x)

    def violation(self, x: np.ndarray) -> float:
        """Largest constraint or bound violation of ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=np.float64)
        worst = 0.0
        if self.num_rows:
            lhs = self.matrix @ x
            for sense, value, bound in zip(self.senses, lhs, self.rhs, strict=True):
                if sense is RowSense.LE:
                    worst = max(worst, value - bound)
                elif sense is RowSense.GE:
                    worst = max(worst, bound - value)
                else:
                    worst = max(worst, abs(value - bound))
        worst = max(worst, float(np.max(self.lower - x, initial=0.0)), float(np.max(x - self.upper, initial=0.0)))
        return worst


@dataclass(frozen=True)
class SolveResult:
    status: SolveStatus
    x: np.ndarray | None = None
    objective: float | None = None
    iterations: int = 0
    nodes: int = 0
    bound: float | None = None

    @property
    def optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL


@dataclass
class _Standard:
    """max cost @ y s.t. matrix @ y (senses) rhs, y >= 0, with x = offset + transform @ y."""

    matrix: np.ndarray
    rhs: np.ndarray
    senses: list[RowSense]
    cost: np.ndarray
    offset: np.ndarray
    transform: np.ndarray


def _standardize(lp: LinearProgram) -> _Standard:
    n = lp.num_vars
    offset = np.zeros(n)
    columns: list[tuple[int, float]] = []
    bound_rows: list[tuple[int, float]] = []
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        if np.isfinite(lo) and hi == lo:
            offset[j] = lo
        elif np.isfinite(lo):
            offset[j] = lo
            columns.append((j, 1.0))
            if np.isfinite(hi):
                bound_rows.append((len(columns) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            columns.append((j, -1.0))
        else:
            columns.extend([(j, 1.0), (j, -1.0)])

    transform = np.zeros((n, len(columns)))
    for k, (j, sign) in enumerate(columns):
        transform[j, k] = sign
    matrix = lp.matrix @ transform
    rhs = lp.rhs - lp.matrix @ offset
    senses = list(lp.senses)
    if bound_rows:
        extra = np.zeros((len(bound_rows), len(columns)))
        for row, (k, width) in enumerate(bound_rows):
            extra[row, k] = 1.0
        matrix = np.vstack([matrix, extra])
        rhs = np.concatenate([rhs, [width for _, width in bound_rows]])
        senses.extend([RowSense.LE] * len(bound_rows))

    flip = rhs < 0
    matrix[flip] *= -1.0
    rhs[flip] *= -1.0
    swap = {RowSense.LE: RowSense.GE, RowSense.GE: RowSense.LE, RowSense.EQ: RowSense.EQ}
    senses = [swap[s] if f else s for s, f in zip(senses, flip, strict=True)]
    cost = (lp.objective @ transform) * (1.0 if lp.maximize else -1.0)
    return _Standard(matrix, rhs, senses, cost, offset, transform)


class _Tableau:
    def __init__(self, table: np.ndarray, rhs: np.ndarray, basis: list[int], limit: int) -> None:
        self.table = table
        self.rhs = rhs
        self.basis = basis
        self.limit = limit
        self.iterations = 0
        self.degenerate = 0
        self.bland = False

    def pivot(self, row: int, col: int) -> None:
        table, rhs = self.table, self.rhs
        pivot = table[row, col]
        table[row] /= pivot
        rhs[row] /= pivot
        factors = table[:, col].copy()
        factors[row] = 0.0
        table -= np.outer(factors, table[row])
        rhs -= factors * rhs[row]
        table[:, col] = 0.0
        table[row, col] = 1.0
        rhs[(rhs < 0.0) & (rhs > -FEASIBILITY_TOL)] = 0.0
        self.basis[row] = col

    def optimise(self, cost: np.ndarray) -> SolveStatus:
        while True:
            if self.iterations >= self.limit:
                return SolveStatus.ITERATION_LIMIT
            basis = np.asarray(self.basis, dtype=int)
            reduced = cost - cost[basis] @ self.table
            reduced[basis] = 0.0
            candidates = np.flatnonzero(reduced > PIVOT_TOL)
            if candidates.size == 0:
                return SolveStatus.OPTIMAL
            if self.bland:
                entering = int(candidates[0])
            else:
                entering = int(candidates[np.argmax(reduced[candidates])])
            column = self.table[:, entering]
            positive = column > PIVOT_TOL
            if not positive.any():
                return SolveStatus.UNBOUNDED
            ratios = np.full(column.shape[0], np.inf)
            ratios[positive] = self.rhs[positive] / column[positive]
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + 1e-12)
            leaving = int(ties[np.argmin(basis[ties])])
            if best <= FEASIBILITY_TOL:
                self.degenerate += 1
                if not self.bland and self.degenerate >= DEGENERATE_RUN:
                    logger.debug(f"Switching to Bland's rule after {self.degenerate} degenerate pivots")
                    self.bland = True
            else:
                self.degenerate = 0
            self.pivot(leaving, entering)
            self.iterations += 1


def solve_lp(lp: LinearProgram, max_iterations: int = MAX_ITERATIONS) -> SolveResult:
    """
    Solve ``lp`` to an optimal basic solution.

    Returns:
        SolveResult whose ``x`` and ``objective`` are in the original variable
        space and sense. Infeasible, unbounded and iteration-capped problems are
        reported through ``status``.
    """
    std = _standardize(lp)
    rows, structural = std.matrix.shape
    slack_rows = [i for i, s in enumerate(std.senses) if s is not RowSense.EQ]
    artificial_rows = [i for i, s in enumerate(std.senses) if s is not RowSense.LE]
    n_slack, n_art = len(slack_rows), len(artificial_rows)
    width = structural + n_slack + n_art
    table = np.zeros((rows, width))
    table[:, :structural] = std.matrix
    basis = [0] * rows
    for k, i in enumerate(slack_rows):
        table[i, structural + k] = 1.0 if std.senses[i] is RowSense.LE else -1.0
        if std.senses[i] is RowSense.LE:
            basis[i] = structural + k
    for k, i in enumerate(artificial_rows):
        table[i, structural + n_slack + k] = 1.0
        basis[i] = structural + n_slack + k
    tableau = _Tableau(table, std.rhs.copy(), basis, max_iterations)

    if n_art:
        phase_one = np.zeros(width)
        phase_one[structural + n_slack :] = -1.0
        status = tableau.optimise(phase_one)
        if status is SolveStatus.ITERATION_LIMIT:
            return SolveResult(status, iterations=tableau.iterations)
        infeasibility = -float(phase_one[np.asarray(tableau.basis, dtype=int)] @ tableau.rhs)
        if infeasibility > FEASIBILITY_TOL * (1.0 + float(np.max(std.rhs, initial=0.0))):
            return SolveResult(SolveStatus.INFEASIBLE, iterations=tableau.iterations)

        first_artificial = structural + n_slack
        redundant = []
        for row, var in enumerate(list(tableau.basis)):
            if var < first_artificial:
                continue
            entries = np.abs(tableau.table[row, :first_artificial])
            col = int(np.argmax(entries)) if entries.size else 0
            if entries.size and entries[col] > PIVOT_TOL:
                tableau.pivot(row, col)
            else:
                redundant.append(row)
        keep = [i for i in range(rows) if i not in redundant]
        tableau.table = tableau.table[keep][:, :first_artificial]
        tableau.rhs = tableau.rhs[keep]
        tableau.basis = [tableau.basis[i] for i in keep]
        tableau.degenerate = 0

    cost = np.concatenate([std.cost, np.zeros(n_slack)])
    status = tableau.optimise(cost)
    if status is not SolveStatus.OPTIMAL:
        return SolveResult(status, iterations=tableau.iterations)

    y = np.zeros(tableau.table.shape[1])
    y[np.asarray(tableau.basis, dtype=int)] = tableau.rhs
    x = np.clip(std.offset + std.transform @ y[:structural], lp.lower, lp.upper)
    return SolveResult(SolveStatus.OPTIMAL, x=x, objective=lp.value(x), iterations=tableau.iterations)
