# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Gaussian sensor-noise prior and deterministic per-simulation random streams.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..common.validation import NoiseConfig

NOISE_COMPONENTS = 4


def rng_for(root_seed: int, index: int) -> np.random.Generator:
    """Independent generator for simulation ``index`` of a campaign seeded with ``root_seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(root_seed), int(index)]))


@dataclass(frozen=True)
class NoisePrior:
    variance: float

    @classmethod
    def from_config(cls, config: NoiseConfig) -> "NoisePrior":
        return cls(variance=config.variance)

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    def sample(self, rng: np.random.Generator, steps: int) -> np.ndarray:
        """A (steps, 4) noise sequence drawn from N(0, variance I)."""
        return rng.normal(0.0, self.std, size=(steps, NOISE_COMPONENTS))

    def sample_batch(self, rng: np.random.Generator, count: int, steps: int) -> np.ndarray:
        return rng.normal(0.0, self.std, size=(count, steps, NOISE_COMPONENTS))
