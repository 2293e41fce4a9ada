# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Cosine variance schedule and the closed-form forward (noising) process.
"""

import math
from dataclasses import dataclass

import numpy as np

MAX_BETA = 0.999
COSINE_OFFSET = 0.008


class ScheduleError(ValueError):
    """Raised for an invalid step count or step index."""

    pass


@dataclass(frozen=True)
class VarianceSchedule:
    betas: np.ndarray

    def __post_init__(self) -> None:
        betas = np.asarray(self.betas, dtype=np.float64)
        if betas.ndim != 1 or betas.size == 0:
            raise ScheduleError("A schedule needs at least one step")
        if np.any(betas <= 0) or np.any(betas > MAX_BETA):
            raise ScheduleError(f"betas must lie in (0, {MAX_BETA}]")
        object.__setattr__(self, "betas", betas)

    @property
    def steps(self) -> int:
        return int(self.betas.size)

    @property
    def alphas(self) -> np.ndarray:
        return 1.0 - self.betas

    @property
    def alpha_bars(self) -> np.ndarray:
        """Cumulative products, index 0 being the clean data (value 1)."""
        return np.concatenate([[1.0], np.cumprod(self.alphas)])

    def beta(self, k: np.ndarray | int) -> np.ndarray:
        return self.betas[np.asarray(k) - 1]

    def check_step(self, k: np.ndarray | int) -> None:
        k = np.asarray(k)
        if np.any(k < 0) or np.any(k > self.steps):
            raise ScheduleError(f"step index must lie in [0, {self.steps}]")


def cosine_schedule(steps: int, offset: float = COSINE_OFFSET) -> VarianceSchedule:
    """
    Cosine schedule: f(k) = cos^2(((k/K) + s) / (1 + s) * pi / 2).

    Each beta is 1 - f(k)/f(k-1), clipped at 0.999; the cumulative products are
    then recomputed from the clipped betas.
    """
    if steps < 1:
        raise ScheduleError(f"steps must be >= 1, got: {steps}")
    k = np.arange(steps + 1, dtype=np.float64)
    f = np.cos(((k / steps) + offset) / (1.0 + offset) * math.pi / 2.0) ** 2
    ratio = f[1:] / f[:-1]
    betas = np.clip(1.0 - ratio, 1e-12, MAX_BETA)
    return VarianceSchedule(betas=betas)


def forward_diffuse(
    schedule: VarianceSchedule,
    x0: np.ndarray,
    k: np.ndarray | int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Sample x_k ~ N(sqrt(abar_k) x0, (1 - abar_k) I).

    Args:
        x0: (batch, dim) or (dim,) clean data in normalised units.
        k: Step index per row (0 leaves the data unchanged).

    Returns:
        (x_k, z) where z is the injected standard normal noise.
    """
    schedule.check_step(k)
    x0 = np.asarray(x0, dtype=np.float64)
    alpha_bar = schedule.alpha_bars[np.asarray(k)]
    if x0.ndim == 2:
        alpha_bar = np.broadcast_to(alpha_bar, (x0.shape[0],))[:, None]
    z = rng.standard_normal(x0.shape)
    return np.sqrt(alpha_bar) * x0 + np.sqrt(1.0 - alpha_bar) * z, z
