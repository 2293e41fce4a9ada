# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Feature embeddings used for the manifold metrics.

The default embedding is the intruder state relative to the ego at each of the
23 post-action snapshots (92 values). The raw noise sequence is available as
an alternative embedding.
"""

from collections.abc import Sequence

import numpy as np

from ..sim import SimOutcome
from .manifold import FeatureLabel, FeatureSet, coverage, density


def trajectory_features(outcome: SimOutcome) -> np.ndarray:
    """Flattened (intruder - ego) position and velocity over snapshots 1..23."""
    trajectory = outcome.padded()
    relative = trajectory[1:, 4:8] - trajectory[1:, 0:4]
    return relative.reshape(-1)


def epsilon_features(noise: np.ndarray) -> np.ndarray:
    return np.asarray(noise, dtype=np.float64).reshape(-1)


def trajectory_feature_set(outcomes: Sequence[SimOutcome], label: FeatureLabel = FeatureLabel.REAL) -> FeatureSet:
    if not outcomes:
        raise ValueError("Cannot build a feature set from zero outcomes")
    return FeatureSet(np.stack([trajectory_features(o) for o in outcomes]), label)


def epsilon_feature_set(noise: np.ndarray, label: FeatureLabel = FeatureLabel.REAL) -> FeatureSet:
    noise = np.asarray(noise, dtype=np.float64)
    return FeatureSet(noise.reshape(noise.shape[0], -1), label)


def manifold_scores(real: FeatureSet, fake: FeatureSet, k: int = 5) -> dict[str, float]:
    """Density and coverage after standardising both sets by the real set's statistics."""
    real_std = real.standardized_against(real)
    fake_std = fake.standardized_against(real)
    return {"density": density(real_std, fake_std, k), "coverage": coverage(real_std, fake_std, k)}
