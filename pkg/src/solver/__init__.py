# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Linear and binary mixed-integer programming.
"""

from .dump import dump_problem, format_problem, load_problem, parse_problem
from .lp import LinearProgram, RowSense, SolveResult, SolveStatus, solve_lp
from .milp import MilpProblem, solve_milp, validate_incumbent

__all__ = [
    "LinearProgram",
    "MilpProblem",
    "RowSense",
    "SolveResult",
    "SolveStatus",
    "dump_problem",
    "format_problem",
    "load_problem",
    "parse_problem",
    "solve_lp",
    "solve_milp",
    "validate_incumbent",
]
