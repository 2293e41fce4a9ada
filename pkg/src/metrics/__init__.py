# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Evaluation metrics: failure and delay rates, density/coverage and the z-test.
"""

from .features import (
    epsilon_feature_set,
    epsilon_features,
    manifold_scores,
    trajectory_feature_set,
    trajectory_features,
)
from .manifold import FeatureLabel, FeatureSet, coverage, density, knn_radii
from .rates import delay_rate, failure_rate
from .ztest import ZTestResult, two_proportion_z

__all__ = [
    "FeatureLabel",
    "FeatureSet",
    "ZTestResult",
    "coverage",
    "delay_rate",
    "density",
    "epsilon_feature_set",
    "epsilon_features",
    "failure_rate",
    "knn_radii",
    "manifold_scores",
    "trajectory_feature_set",
    "trajectory_features",
    "two_proportion_z",
]
