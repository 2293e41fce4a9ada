# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Conditioning features: sinusoidal step embedding plus scaled (rho, s0).
"""

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..common.validation import DiffusionConfig


@dataclass(frozen=True)
class Conditioning:
    rho_threshold: float
    s0: np.ndarray

    def __post_init__(self) -> None:
        if not (math.isfinite(self.rho_threshold) and self.rho_threshold >= 0):
            raise ValueError(f"rho_threshold must be finite and >= 0, got: {self.rho_threshold}")
        if not np.all(np.isfinite(self.s0)):
            raise ValueError("s0 entries must be finite")


def timestep_embedding(k: np.ndarray, dim: int, max_period: float = 10000.0) -> np.ndarray:
    """(batch, dim) sine/cosine features of integer steps."""
    k = np.atleast_1d(np.asarray(k, dtype=np.float64))
    half = dim // 2
    frequencies = np.exp(-math.log(max_period) * np.arange(half, dtype=np.float64) / half)
    angles = k[:, None] * frequencies[None, :]
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)


@dataclass
class ConditionEncoder:
    """Maps rho and s0 onto roughly [-1, 1]."""

    rho_bounds: tuple[float, float]
    s0_scale: np.ndarray
    relative_s0: bool = False
    _scale: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._scale = np.asarray(self.s0_scale, dtype=np.float64)
        if self.relative_s0 and self._scale.size != 8:
            raise ValueError("relative s0 conditioning needs the 8-component vehicle state")

    @classmethod
    def for_vehicle_state(cls, config: DiffusionConfig) -> "ConditionEncoder":
        p, v = config.position_bound, config.velocity_bound
        return cls(
            rho_bounds=tuple(config.rho_bounds),  # type: ignore[arg-type]
            s0_scale=np.array([p, p, v, v, p, p, v, v]),
            relative_s0=config.relative_s0,
        )

    @property
    def dim(self) -> int:
        return 1 + int(self._scale.size)

    def encode(self, rho: np.ndarray, s0: np.ndarray) -> np.ndarray:
        rho = np.atleast_1d(np.asarray(rho, dtype=np.float64))
        s0 = np.atleast_2d(np.asarray(s0, dtype=np.float64))
        lo, hi = self.rho_bounds
        rho_feature = np.clip(2.0 * (rho - lo) / (hi - lo) - 1.0, -1.0, 1.0)
        if self.relative_s0:
            s0 = s0.copy()
            s0[:, 4:] = s0[:, 4:] - s0[:, :4]
        return np.concatenate([rho_feature[:, None], s0 / self._scale], axis=1)

    def to_dict(self) -> dict[str, Any]:
        return {
            "rho_bounds": list(self.rho_bounds),
            "s0_scale": self._scale.tolist(),
            "relative_s0": self.relative_s0,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ConditionEncoder":
        return cls(
            rho_bounds=tuple(data["rho_bounds"]),  # type: ignore[arg-type]
            s0_scale=np.asarray(data["s0_scale"], dtype=np.float64),
            relative_s0=bool(data["relative_s0"]),
        )
