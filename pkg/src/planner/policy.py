# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Policy-phase action: the most conservative IDM response over plausible beliefs.
"""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from .kalman import BeliefFilter

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PolicyDecision:
    acceleration: float
    plausible: np.ndarray
    fallback: bool

    @property
    def plausible_count(self) -> int:
        return int(self.plausible.shape[0])


def plausible_states(states: np.ndarray, observation: np.ndarray, eta: float) -> np.ndarray:
    """Rows of ``states`` whose position lies within ``eta`` of the observed position."""
    states = np.atleast_2d(states)
    distance = np.hypot(*(states[:, :2] - np.asarray(observation)[:2]).T)
    return states[distance <= eta]


def policy_phase_action(
    filters: Sequence[BeliefFilter],
    observation: np.ndarray,
    idm_action: Callable[[np.ndarray], float],
    samples_per_filter: int,
    eta: float,
    rng: np.random.Generator,
) -> PolicyDecision:
    """
    Choose the lowest IDM acceleration over plausible belief samples.

    Args:
        filters: Beliefs; ``filters[0]`` is the observation-driven one.
        observation: Current observed intruder state.
        idm_action: Ego IDM acceleration against a hypothesised intruder state.
        samples_per_filter: Draws per belief.
        eta: Plausibility radius around the observed position.
        rng: Random stream for the draws.

    Returns:
        PolicyDecision; when nothing is plausible the observation belief's mean is used.
    """
    if not filters:
        raise ValueError("policy_phase_action needs at least one belief")
    draws = np.vstack([belief.sample(rng, samples_per_filter) for belief in filters])
    plausible = plausible_states(draws, observation, eta)
    if plausible.shape[0] == 0:
        logger.debug("No plausible belief samples; acting on the observation belief mean")
        return PolicyDecision(float(idm_action(filters[0].mean)), plausible, True)
    actions = [idm_action(state) for state in plausible]
    return PolicyDecision(float(min(actions)), plausible, False)
