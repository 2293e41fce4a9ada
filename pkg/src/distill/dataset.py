# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Teacher dataset: (noise, robustness, s0) records drawn from a trained teacher.

CFTD layout (little-endian): magic "CFTD", version u32, count u32, spawn u8,
then per record float32 noise (92), float32 rho, float32 s0 (8),
u8 intruder destination, u8 ego destination, float32 intruder exponent.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..common.storage import ArtifactFormatError, BinaryReader, BinaryWriter, read_bytes, write_bytes
from ..diffusion import DenoiserModel, ScenarioEvaluator
from ..sim import Branch, Scenario

logger = logging.getLogger(__name__)

DATASET_MAGIC = b"CFTD"
DATASET_VERSION = 1


@dataclass(frozen=True)
class TeacherRecord:
    epsilon: np.ndarray
    rho: float
    s0: np.ndarray
    intruder_destination: Branch
    ego_destination: Branch
    intruder_idm_delta: float

    def scenario(self, spawn: Branch) -> Scenario:
        return Scenario(
            intruder_spawn=spawn,
            intruder_destination=self.intruder_destination,
            ego_destination=self.ego_destination,
            intruder_idm_delta=self.intruder_idm_delta,
        )


@dataclass
class TeacherDataset:
    spawn: Branch
    records: list[TeacherRecord]

    def __len__(self) -> int:
        return len(self.records)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(noise, rho, s0) stacked as float64 arrays."""
        return (
            np.stack([r.epsilon for r in self.records]).astype(np.float64),
            np.array([r.rho for r in self.records], dtype=np.float64),
            np.stack([r.s0 for r in self.records]).astype(np.float64),
        )

    def split(self, fraction: float, seed: int = 0) -> tuple["TeacherDataset", "TeacherDataset"]:
        """Deterministic (train, validation) split."""
        order = np.random.default_rng(seed).permutation(len(self.records))
        cut = max(1, int(round(fraction * len(self.records))))
        cut = min(cut, len(self.records) - 1) if len(self.records) > 1 else cut
        held = sorted(order[:cut].tolist())
        kept = sorted(order[cut:].tolist())
        return (
            TeacherDataset(self.spawn, [self.records[i] for i in kept]),
            TeacherDataset(self.spawn, [self.records[i] for i in held]),
        )


def build_teacher_dataset(
    teacher: DenoiserModel,
    evaluator: ScenarioEvaluator,
    count: int,
    rng: np.random.Generator,
    batch_size: int = 256,
) -> TeacherDataset:
    """
    Sample the teacher at rho_threshold = 0 and record the achieved robustness.

    Raises:
        ValueError: if ``count`` < 1.
    """
    if count < 1:
        raise ValueError(f"Dataset size must be >= 1, got: {count}")
    records: list[TeacherRecord] = []
    while len(records) < count:
        size = min(batch_size, count - len(records))
        cases = [evaluator.sample_s0(rng) for _ in range(size)]
        s0 = np.stack([case.s0 for case in cases])
        eps = teacher.sample_batch(np.zeros(size), s0, rng).astype(np.float32)
        for case, noise in zip(cases, eps, strict=True):
            rho = evaluator.evaluate(case, noise)
            records.append(
                TeacherRecord(
                    epsilon=noise,
                    rho=float(np.float32(rho)),
                    s0=case.s0.astype(np.float32),
                    intruder_destination=case.scenario.intruder_destination,
                    ego_destination=case.scenario.ego_destination,
                    intruder_idm_delta=case.scenario.intruder_idm_delta,
                )
            )
        logger.debug(f"Teacher dataset: {len(records)}/{count} records")
    failures = sum(r.rho == 0.0 for r in records)
    logger.info(f"Built teacher dataset of {count} records ({failures} failures) for {evaluator.spawn.label}")
    return TeacherDataset(evaluator.spawn, records)


def resimulate(record: TeacherRecord, evaluator: ScenarioEvaluator) -> float:
    """Robustness of re-running a record, rounded to float32 like the stored value."""
    case = evaluator.case_for(record.scenario(evaluator.spawn), record.s0)
    return float(np.float32(evaluator.evaluate(case, record.epsilon)))


def encode_dataset(dataset: TeacherDataset) -> bytes:
    writer = BinaryWriter()
    writer.raw(DATASET_MAGIC)
    writer.pack("IIB", DATASET_VERSION, len(dataset.records), int(dataset.spawn))
    for record in dataset.records:
        writer.array(record.epsilon, np.float32)
        writer.pack("f", record.rho)
        writer.array(record.s0, np.float32)
        writer.pack(
            "BBf",
            int(record.intruder_destination),
            int(record.ego_destination),
            record.intruder_idm_delta,
        )
    return writer.getvalue()


def decode_dataset(payload: bytes, source: str = "<bytes>", noise_dim: int = 92) -> TeacherDataset:
    reader = BinaryReader(payload, source)
    reader.expect_magic(DATASET_MAGIC)
    reader.expect_version(DATASET_VERSION)
    count, spawn_code = reader.unpack("IB")
    try:
        spawn = Branch(spawn_code)
        records = []
        for _ in range(count):
            epsilon = reader.array(np.float32, noise_dim)
            (rho,) = reader.unpack("f")
            s0 = reader.array(np.float32, 8)
            intruder_destination, ego_destination, delta = reader.unpack("BBf")
            records.append(
                TeacherRecord(
                    epsilon=epsilon,
                    rho=float(rho),
                    s0=s0,
                    intruder_destination=Branch(intruder_destination),
                    ego_destination=Branch(ego_destination),
                    intruder_idm_delta=float(delta),
                )
            )
    except ValueError as e:
        if isinstance(e, ArtifactFormatError):
            raise
        raise ArtifactFormatError(f"{source}: invalid branch code ({e})") from e
    reader.expect_end()
    return TeacherDataset(spawn, records)


def write_dataset(path: str | Path, dataset: TeacherDataset) -> Path:
    target = write_bytes(path, encode_dataset(dataset))
    logger.info(f"Wrote {len(dataset)} teacher records to {target}")
    return target


def read_dataset(path: str | Path) -> TeacherDataset:
    return decode_dataset(read_bytes(path), str(path))
