# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Simulation outcomes and their CFSO batch file format.

Layout (little-endian): magic "CFSO", version u32, count u32, then per record
spawn u8, 24x8 float32 trajectory, float32 robustness, u8 collided.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..common.storage import ArtifactFormatError, BinaryReader, BinaryWriter, read_bytes, write_bytes
from .geometry import Branch
from .scenario import Scenario

logger = logging.getLogger(__name__)

OUTCOME_MAGIC = b"CFSO"
OUTCOME_VERSION = 1
SNAPSHOTS = 24
STATE_COLUMNS = ("ego_x", "ego_y", "ego_vx", "ego_vy", "intr_x", "intr_y", "intr_vx", "intr_vy")


@dataclass
class SimOutcome:
    spawn: Branch
    trajectory: np.ndarray
    robustness: float
    collided: bool
    scenario: Scenario | None = None
    start_t: int = 0

    @property
    def ego_positions(self) -> np.ndarray:
        return self.trajectory[:, 0:2]

    @property
    def intruder_positions(self) -> np.ndarray:
        return self.trajectory[:, 4:6]

    def padded(self, snapshots: int = SNAPSHOTS) -> np.ndarray:
        """Trajectory with exactly ``snapshots`` rows; a late start repeats its first row."""
        rows = self.trajectory.shape[0]
        if rows > snapshots:
            raise ArtifactFormatError(f"Trajectory has {rows} snapshots, more than {snapshots}")
        if rows == snapshots:
            return self.trajectory
        head = np.repeat(self.trajectory[:1], snapshots - rows, axis=0)
        return np.vstack([head, self.trajectory])


def encode_outcomes(outcomes: list[SimOutcome]) -> bytes:
    writer = BinaryWriter()
    writer.raw(OUTCOME_MAGIC)
    writer.pack("II", OUTCOME_VERSION, len(outcomes))
    for outcome in outcomes:
        writer.pack("B", int(outcome.spawn))
        writer.array(outcome.padded(), np.float32)
        writer.pack("fB", float(outcome.robustness), int(bool(outcome.collided)))
    return writer.getvalue()


def decode_outcomes(payload: bytes, source: str = "<bytes>") -> list[SimOutcome]:
    reader = BinaryReader(payload, source)
    reader.expect_magic(OUTCOME_MAGIC)
    reader.expect_version(OUTCOME_VERSION)
    (count,) = reader.unpack("I")
    outcomes = []
    for _ in range(count):
        (spawn_code,) = reader.unpack("B")
        try:
            spawn = Branch(spawn_code)
        except ValueError:
            raise ArtifactFormatError(f"{source}: unknown scenario code {spawn_code}") from None
        trajectory = reader.array(np.float32, SNAPSHOTS * 8).reshape(SNAPSHOTS, 8).astype(np.float64)
        robustness, collided = reader.unpack("fB")
        outcomes.append(
            SimOutcome(
                spawn=spawn,
                trajectory=trajectory,
                robustness=float(robustness),
                collided=bool(collided),
            )
        )
    reader.expect_end()
    return outcomes


def write_outcomes(path: str | Path, outcomes: list[SimOutcome]) -> Path:
    target = write_bytes(path, encode_outcomes(outcomes))
    logger.info(f"Wrote {len(outcomes)} outcomes to {target}")
    return target


def read_outcomes(path: str | Path) -> list[SimOutcome]:
    return decode_outcomes(read_bytes(path), str(path))


def write_outcomes_csv(path: str | Path, outcomes: list[SimOutcome]) -> Path:
    """Human-readable mirror of a CFSO batch: one row per outcome."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    header = ["index", "scenario", "robustness", "collided"] + [
        f"t{t:02d}_{column}" for t in range(SNAPSHOTS) for column in STATE_COLUMNS
    ]
    with target.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for index, outcome in enumerate(outcomes):
            flat = outcome.padded().astype(np.float32).reshape(-1)
            writer.writerow(
                [index, outcome.spawn.label, repr(float(np.float32(outcome.robustness))), int(outcome.collided)]
                + [repr(float(value)) for value in flat]
            )
    return target
