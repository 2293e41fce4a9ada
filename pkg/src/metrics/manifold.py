# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
k-nearest-neighbour manifold metrics: density and coverage.

Each real point carries a ball whose radius is the distance to its k-th nearest
real neighbour (the point itself excluded). Ball membership is inclusive, so a
point at exactly the radius counts.
"""

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.spatial.distance import cdist

logger = logging.getLogger(__name__)


class FeatureLabel(str, Enum):
    REAL = "real"
    GENERATED = "generated"


@dataclass(frozen=True)
class FeatureSet:
    points: np.ndarray
    label: FeatureLabel = FeatureLabel.REAL

    def __post_init__(self) -> None:
        points = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        if points.ndim != 2:
            raise ValueError(f"Feature points must be a 2-D array, got shape {points.shape}")
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def standardized_against(self, real: "FeatureSet") -> "FeatureSet":
        """Shift and scale by the real set's per-dimension mean and std (constant dims keep scale 1)."""
        mean = real.points.mean(axis=0)
        std = real.points.std(axis=0)
        std = np.where(std > 1e-12, std, 1.0)
        return FeatureSet((self.points - mean) / std, self.label)


def _points(value: "FeatureSet | np.ndarray") -> np.ndarray:
    if isinstance(value, FeatureSet):
        return value.points
    return np.atleast_2d(np.asarray(value, dtype=np.float64))


def _check(real: np.ndarray, fake: np.ndarray, k: int) -> None:
    if k < 1:
        raise ValueError(f"k must be >= 1, got: {k}")
    if real.shape[1] != fake.shape[1]:
        raise ValueError(f"Feature dimension mismatch: real {real.shape[1]}, generated {fake.shape[1]}")
    if real.shape[0] <= k:
        raise ValueError(f"Need more than k={k} real points, got {real.shape[0]}")
    if fake.shape[0] == 0:
        raise ValueError("Generated feature set is empty")


def knn_radii(real: "FeatureSet | np.ndarray", k: int) -> np.ndarray:
    """Distance from each real point to its k-th nearest real neighbour."""
    points = _points(real)
    distances = cdist(points, points)
    # column 0 of the sorted row is the point itself
    return np.sort(distances, axis=1)[:, k]


def density(real: "FeatureSet | np.ndarray", fake: "FeatureSet | np.ndarray", k: int = 5) -> float:
    """(1 / kM) * sum over generated points of the number of real balls containing them."""
    real_points, fake_points = _points(real), _points(fake)
    _check(real_points, fake_points, k)
    radii = knn_radii(real_points, k)
    inside = cdist(real_points, fake_points) <= radii[:, None]
    return float(inside.sum()) / (k * fake_points.shape[0])


def coverage(real: "FeatureSet | np.ndarray", fake: "FeatureSet | np.ndarray", k: int = 5) -> float:
    """Fraction of real points whose ball contains at least one generated point."""
    real_points, fake_points = _points(real), _points(fake)
    _check(real_points, fake_points, k)
    radii = knn_radii(real_points, k)
    nearest = cdist(real_points, fake_points).min(axis=1)
    return float(np.mean(nearest <= radii))
