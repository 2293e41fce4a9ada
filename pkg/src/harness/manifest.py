# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Run-directory layout and per-command manifests.

Every command reads its inputs from a source run directory and writes its
outputs to a target directory (the same one, except during replay), then
records ``manifest_<command>.json`` with the resolved configuration, its hash
and the sha256 of every input and output.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..common.config import config_digest
from ..common.storage import read_bytes, sha256_file, write_bytes
from ..common.validation import RunConfig
from ..sim.geometry import Branch

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1


class MissingArtifactError(FileNotFoundError):
    """Raised when a command's input artifact does not exist."""

    def __init__(self, path: Path, producer: str) -> None:
        self.path = path
        self.producer = producer
        super().__init__(f"Missing artifact {path}; run the '{producer}' command first")


@dataclass(frozen=True)
class ArtifactLayout:
    """File names of every artifact inside a run directory."""

    root: Path

    def mc_outcomes(self, spawn: Branch) -> Path:
        return self.root / "mc" / spawn.label / "outcomes.cfso"

    def mc_failures(self, spawn: Branch) -> Path:
        return self.root / "mc" / spawn.label / "failures.cfso"

    def mc_failures_csv(self, spawn: Branch) -> Path:
        return self.root / "mc" / spawn.label / "failures.csv"

    def mc_failure_noise(self, spawn: Branch) -> Path:
        return self.root / "mc" / spawn.label / "failure_noise.npy"

    def teacher(self, spawn: Branch) -> Path:
        return self.root / "models" / spawn.label / "teacher.cfnn"

    def student(self, spawn: Branch) -> Path:
        return self.root / "models" / spawn.label / "student.cfnn"

    def dataset(self, spawn: Branch) -> Path:
        return self.root / "models" / spawn.label / "teacher_samples.cftd"

    def samples(self, spawn: Branch, model: str) -> Path:
        return self.root / "samples" / spawn.label / f"{model}.cfso"

    def sample_noise(self, spawn: Branch, model: str) -> Path:
        return self.root / "samples" / spawn.label / f"{model}_noise.npy"

    def rollout(self, spawn: Branch, index: int) -> Path:
        return self.root / "rollouts" / f"{spawn.label}_{index}.csv"

    def report(self, name: str) -> Path:
        return self.root / "reports" / f"{name}.csv"

    def manifest(self, command: str) -> Path:
        return self.root / f"manifest_{command}.json"


def require(path: Path, producer: str) -> Path:
    if not path.is_file():
        logger.error(f"Missing input {path} (produced by '{producer}')")
        raise MissingArtifactError(path, producer)
    return path


@dataclass
class CommandRecord:
    """Inputs read and outputs written by one command invocation."""

    command: str
    source: Path
    target: Path
    inputs: list[Path] = field(default_factory=list)
    outputs: list[Path] = field(default_factory=list)
    volatile: list[Path] = field(default_factory=list)

    def read(self, path: Path, producer: str) -> Path:
        self.inputs.append(require(path, producer))
        return path

    def wrote(self, path: Path, volatile: bool = False) -> Path:
        (self.volatile if volatile else self.outputs).append(path)
        return path


def _hashes(paths: list[Path], root: Path) -> dict[str, str]:
    return {str(p.relative_to(root)): sha256_file(p) for p in paths}


def write_manifest(record: CommandRecord, config: RunConfig) -> Path:
    payload: dict[str, Any] = {
        "version": MANIFEST_VERSION,
        "command": record.command,
        "seed": config.campaign.seed,
        "scenarios": list(config.campaign.scenarios),
        "config_sha256": config_digest(config),
        "config": json.loads(config.to_json()),
        "inputs": _hashes(record.inputs, record.source),
        "outputs": _hashes(record.outputs, record.target),
        "volatile_outputs": sorted(str(p.relative_to(record.target)) for p in record.volatile),
    }
    target = write_bytes(
        ArtifactLayout(record.target).manifest(record.command),
        (json.dumps(payload, sort_keys=True, indent=2) + "\n").encode("utf-8"),
    )
    logger.info(f"Manifest for '{record.command}' written to {target}")
    return target


def read_manifest(root: Path, command: str) -> dict[str, Any]:
    path = require(ArtifactLayout(root).manifest(command), command)
    return json.loads(read_bytes(path).decode("utf-8"))
