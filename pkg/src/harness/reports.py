# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
CSV reports. Floats are written with ``repr`` so identical runs give identical bytes.
"""

import csv
import io
import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from ..common.storage import write_bytes

logger = logging.getLogger(__name__)

MC_COLUMNS = ("scenario", "simulations", "failures", "failure_rate", "noise_variance", "noise_inflation")
TRAINING_COLUMNS = ("scenario", "round", "percentile", "threshold", "elite_count", "failures", "validation_loss")
DISTILL_COLUMNS = (
    "scenario",
    "iteration",
    "generator_loss",
    "discriminator_loss",
    "distill_loss",
    "discriminator_accuracy",
    "validation_score",
    "saturated",
)
METRICS_COLUMNS = ("scenario", "model", "failure_rate", "density", "coverage")
TIMING_COLUMNS = ("scenario", "model", "samples", "seconds", "seconds_per_1000", "speedup")
PLANNER_COLUMNS = ("scenario", "controller", "simulations", "failures", "failure_rate", "delays", "delay_rate")
ZTEST_COLUMNS = ("scenario", "z", "p_value", "significant", "degenerate")


def format_cell(value: Any) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def encode_csv(columns: Sequence[str], rows: Sequence[dict[str, Any]]) -> bytes:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        missing = set(columns) - row.keys()
        if missing:
            raise ValueError(f"Report row is missing columns: {sorted(missing)}")
        writer.writerow([format_cell(row[c]) for c in columns])
    return buffer.getvalue().encode("utf-8")


def write_report(path: str | Path, columns: Sequence[str], rows: Sequence[dict[str, Any]]) -> Path:
    target = write_bytes(path, encode_csv(columns, rows))
    logger.info(f"Wrote {len(rows)}-row report {target}")
    return target


def read_report(path: str | Path) -> list[dict[str, str]]:
    with Path(path).open(newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))
