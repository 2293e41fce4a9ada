# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Kalman beliefs over the intruder state used in the policy phase.

The position block follows a constant-acceleration prediction driven by the
observed velocity; the velocity belief is always reset to the current
observation with covariance ``gamma * I``.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg

logger = logging.getLogger(__name__)

TRANSITION = np.array([[1.0, 0.0, 0.5, 0.0], [0.0, 1.0, 0.0, 0.5]])
PSD_TOLERANCE = 1e-9
OBSERVATION_SOURCE = "observation"


class BeliefError(ValueError):
    """Raised when a belief covariance is not symmetric positive semidefinite."""

    pass


def check_psd(covariance: np.ndarray, tol: float = PSD_TOLERANCE) -> None:
    covariance = np.asarray(covariance, dtype=float)
    if covariance.shape != (4, 4) or not np.all(np.isfinite(covariance)):
        raise BeliefError(f"Covariance must be a finite 4x4 matrix, got shape {covariance.shape}")
    scale = max(1.0, float(np.max(np.abs(covariance))))
    if np.max(np.abs(covariance - covariance.T)) > tol * scale:
        raise BeliefError("Covariance is not symmetric")
    smallest = float(linalg.eigvalsh(covariance)[0])
    if smallest < -tol * scale:
        raise BeliefError(f"Covariance is not positive semidefinite (smallest eigenvalue {smallest:.3g})")


def _symmetric(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)


@dataclass(frozen=True)
class BeliefFilter:
    mean: np.ndarray
    covariance: np.ndarray
    sample_index: int | None = None

    @classmethod
    def diffuse(cls, state: np.ndarray, gamma: float, sample_index: int | None = None) -> "BeliefFilter":
        """Belief centred on ``state`` with covariance ``3 * gamma * I``."""
        state = np.asarray(state, dtype=float)
        if state.shape != (4,):
            raise BeliefError(f"Belief state must be a 4-vector, got shape {state.shape}")
        return cls(state.copy(), 3.0 * gamma * np.eye(4), sample_index)

    @property
    def source(self) -> str:
        if self.sample_index is None:
            return OBSERVATION_SOURCE
        return f"failure_sample_{self.sample_index}"

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """(count, 4) draws from the belief."""
        return rng.multivariate_normal(self.mean, self.covariance, size=count, method="eigh")


def kalman_update(belief: BeliefFilter, observation: np.ndarray, gamma: float) -> BeliefFilter:
    """
    One predict/correct step against a new observation ``[x, y, vx, vy]``.

    Args:
        belief: Current belief; its covariance must be symmetric PSD.
        observation: Observed (or sampled-trajectory) intruder state.
        gamma: Noise scale; observation covariance ``gamma * I``, process
            covariance ``gamma / 4 * I``.

    Returns:
        BeliefFilter: Posterior belief from the same source.
    """
    check_psd(belief.covariance)
    observation = np.asarray(observation, dtype=float)
    eye = np.eye(2)
    predicted_mean = TRANSITION @ belief.mean + 0.5 * observation[2:4]
    predicted_cov = TRANSITION @ belief.covariance @ TRANSITION.T + 0.25 * gamma * eye
    # K = P (P + R)^-1 with P, R symmetric
    gain = linalg.solve(predicted_cov + gamma * eye, predicted_cov, assume_a="pos").T
    position = predicted_mean + gain @ (observation[:2] - predicted_mean)
    position_cov = _symmetric((eye - gain) @ predicted_cov)

    mean = np.concatenate([position, observation[2:4]])
    covariance = np.zeros((4, 4))
    covariance[:2, :2] = position_cov
    covariance[2:, 2:] = gamma * eye
    return replace(belief, mean=mean, covariance=covariance)
