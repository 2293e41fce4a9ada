# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Plain-text problem dumps for debugging.

Format (one item per line, whitespace separated, floats in repr form so that
they round-trip exactly; ``inf``/``-inf`` allowed in bounds)::

    cfs-milp 1
    sense max|min
    vars <n>
    rows <m>
    c <c_1> ... <c_n>
    lo <lo_1> ... <lo_n>
    hi <hi_1> ... <hi_n>
    int <i_1> ... <i_k>
    row <sense> <rhs> <a_1> ... <a_n>      (m lines)
    end
"""

import logging
from pathlib import Path

import numpy as np

from ..common.storage import ArtifactFormatError, read_bytes, write_bytes
from .lp import LinearProgram, RowSense
from .milp import MilpProblem

logger = logging.getLogger(__name__)

DUMP_HEADER = "cfs-milp 1"


def _floats(values: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in values)


def format_problem(problem: MilpProblem) -> str:
    lp = problem.lp
    lines = [
        DUMP_HEADER,
        f"sense {'max' if lp.maximize else 'min'}",
        f"vars {lp.num_vars}",
        f"rows {lp.num_rows}",
        f"c {_floats(lp.objective)}".rstrip(),
        f"lo {_floats(lp.lower)}".rstrip(),
        f"hi {_floats(lp.upper)}".rstrip(),
        ("int " + " ".join(str(i) for i in problem.integer)).rstrip(),
    ]
    for sense, rhs, row in zip(lp.senses, lp.rhs, lp.matrix, strict=True):
        lines.append(f"row {sense.value} {float(rhs)!r} {_floats(row)}".rstrip())
    lines.append("end")
    return "\n".join(lines) + "\n"


def parse_problem(text: str, source: str = "<text>") -> MilpProblem:
    lines = [line.split() for line in text.splitlines() if line.strip() and not line.startswith("#")]
    try:
        if " ".join(lines[0]) != DUMP_HEADER:
            raise ArtifactFormatError(f"{source}: expected header '{DUMP_HEADER}'")
        fields = {tokens[0]: tokens[1:] for tokens in lines[1:8]}
        n, m = int(fields["vars"][0]), int(fields["rows"][0])
        objective = np.array([float(v) for v in fields["c"]])
        lower = np.array([float(v) for v in fields["lo"]])
        upper = np.array([float(v) for v in fields["hi"]])
        integer = tuple(int(v) for v in fields["int"])
        rows = lines[8 : 8 + m]
        if len(rows) != m or any(r[0] != "row" for r in rows) or lines[8 + m] != ["end"]:
            raise ArtifactFormatError(f"{source}: expected {m} row lines followed by 'end'")
        senses = tuple(RowSense(r[1]) for r in rows)
        rhs = np.array([float(r[2]) for r in rows])
        matrix = np.array([[float(v) for v in r[3:]] for r in rows]).reshape(m, n)
        lp = LinearProgram(objective, matrix, rhs, senses, lower, upper, maximize=fields["sense"][0] == "max")
        return MilpProblem(lp, integer)
    except ArtifactFormatError:
        raise
    except (IndexError, KeyError, ValueError) as e:
        raise ArtifactFormatError(f"{source}: malformed problem dump ({e})") from e


def dump_problem(problem: MilpProblem, path: str | Path) -> Path:
    target = write_bytes(path, format_problem(problem).encode("utf-8"))
    logger.debug(f"Dumped {problem.lp.num_vars}-variable problem to {target}")
    return target


def load_problem(path: str | Path) -> MilpProblem:
    return parse_problem(read_bytes(path).decode("utf-8"), str(path))
