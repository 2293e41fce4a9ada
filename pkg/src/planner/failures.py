# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Failure sample sets: student samples simulated forward and ranked by robustness.
"""

import logging
from dataclasses import dataclass

import numpy as np

from ..diffusion.denoiser import DenoiserModel
from ..sim.noise import NOISE_COMPONENTS
from ..sim.scenario import (
    Scenario,
    SimulationError,
    initial_state_from_vector,
    sample_scenario,
)
from ..sim.world import Simulator

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FailureSampleSet:
    """
    Intruder trajectories from timestep ``start_t`` to the horizon.

    ``trajectories[i, 0]`` is the observed intruder state the set was
    conditioned on; later rows are simulated states.
    """

    trajectories: np.ndarray
    robustness: np.ndarray
    start_t: int

    def __post_init__(self) -> None:
        if self.trajectories.ndim != 3 or self.trajectories.shape[2] != 4:
            raise ValueError(f"trajectories must be (N, steps, 4), got {self.trajectories.shape}")
        if self.robustness.shape != (self.trajectories.shape[0],):
            raise ValueError("robustness must hold one value per trajectory")

    def __len__(self) -> int:
        return int(self.trajectories.shape[0])

    @property
    def end_t(self) -> int:
        return self.start_t + self.trajectories.shape[1] - 1

    def states_at(self, t: int) -> np.ndarray:
        """(N, 4) intruder states at absolute timestep ``t``."""
        if not self.start_t <= t <= self.end_t:
            raise IndexError(f"timestep {t} outside {self.start_t}..{self.end_t}")
        return self.trajectories[:, t - self.start_t, :]

    def positions_at(self, t: int) -> np.ndarray:
        return self.states_at(t)[:, :2]


def select_lowest(robustness: np.ndarray, count: int) -> np.ndarray:
    """Indices of the ``count`` smallest values; ties keep generation order."""
    return np.argsort(np.asarray(robustness), kind="stable")[:count]


def generate_failure_set(
    student: DenoiserModel,
    simulator: Simulator,
    scenario: Scenario,
    o_t: np.ndarray,
    t: int,
    total: int,
    keep: int,
    rng: np.random.Generator,
    delta_range: tuple[float, float] = (3.5, 4.5),
) -> FailureSampleSet:
    """
    Sample ``total`` failure noise sequences at robustness threshold 0 and keep the worst ``keep``.

    Args:
        student: One-step failure sampler for the scenario's intruder spawn.
        simulator: Closed-loop world; both vehicles follow IDM.
        scenario: The ego's view of the scenario. The intruder destination and
            IDM exponent are unknown to the ego and redrawn per sample.
        o_t: 8-vector of the true ego state and the observed intruder state.
        t: Current timestep.
        total, keep: Number of samples drawn and kept.
        rng: Random stream for the sampler and scenario draws.

    Returns:
        FailureSampleSet spanning ``t``..horizon.
    """
    if not 1 <= keep <= total:
        raise ValueError(f"Need 1 <= keep <= total, got keep={keep}, total={total}")
    steps = simulator.horizon - t
    if steps < 0:
        raise SimulationError(f"Cannot build a failure set at t={t} past the horizon {simulator.horizon}")
    o_t = np.asarray(o_t, dtype=float)
    noise = student.sample_batch(np.zeros(total), np.tile(o_t, (total, 1)), rng)
    noise = noise.reshape(total, -1, NOISE_COMPONENTS)[:, :steps]

    trajectories = np.empty((total, steps + 1, 4))
    rho = np.empty(total)
    for i in range(total):
        drawn = sample_scenario(scenario.intruder_spawn, rng, delta_range)
        candidate = Scenario(
            intruder_spawn=scenario.intruder_spawn,
            intruder_destination=drawn.intruder_destination,
            ego_destination=scenario.ego_destination,
            intruder_idm_delta=drawn.intruder_idm_delta,
        )
        s0 = initial_state_from_vector(simulator.world, candidate, o_t)
        outcome = simulator.run_simulation(candidate, s0, noise[i], start_t=t)
        trajectories[i] = outcome.trajectory[:, 4:8]
        rho[i] = outcome.robustness
    trajectories[:, 0] = o_t[4:8]

    chosen = select_lowest(rho, keep)
    logger.debug(
        f"Failure set at t={t}: kept {keep}/{total}, "
        f"{int(np.sum(rho == 0.0))} collisions, worst kept rho {rho[chosen[-1]]:.4f}"
    )
    return FailureSampleSet(trajectories[chosen], rho[chosen], t)
