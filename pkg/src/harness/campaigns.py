# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Simulation campaigns over independent per-episode random streams.

Episode ``i`` of a campaign seeded with ``s`` always draws from
``rng_for(s, i)``, so results do not depend on the number of workers. With
more than one worker, episodes run in a process pool whose workers build their
simulator (and failure sampler) once in an initializer; results are returned
in episode order.
"""

import logging
import multiprocessing as mp
from collections.abc import Callable, Iterator
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..common.validation import RunConfig
from ..diffusion.denoiser import DenoiserModel
from ..planner.robust import POLICY, RolloutStep, run_idm_baseline, run_robust_planner
from ..sim.geometry import Branch
from ..sim.noise import NoisePrior, rng_for
from ..sim.outcomes import SimOutcome
from ..sim.scenario import sample_initial_state, sample_scenario
from ..sim.world import Simulator

logger = logging.getLogger(__name__)

CHUNK_SIZE = 64
LOGGED_ROLLOUTS = 1


def scenario_seed(seed: int, spawn: Branch) -> int:
    """Root seed of one scenario's campaign, derived from the run seed."""
    return int(np.random.SeedSequence([int(seed), int(spawn)]).generate_state(1)[0])


def planner_rng(seed: int, index: int) -> np.random.Generator:
    """Planner-internal stream, independent of the episode stream ``rng_for(seed, index)``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]).spawn(1)[0])


@dataclass(frozen=True)
class CampaignSpec:
    """Everything a worker needs to rebuild its context; must pickle."""

    config: RunConfig
    spawn: Branch
    seed: int
    student_path: str | None = None


@dataclass
class CampaignContext:
    spec: CampaignSpec
    simulator: Simulator
    prior: NoisePrior
    student: DenoiserModel | None = None

    @classmethod
    def build(cls, spec: CampaignSpec) -> "CampaignContext":
        student = DenoiserModel.load(spec.student_path) if spec.student_path else None
        return cls(
            spec=spec,
            simulator=Simulator.from_config(spec.config),
            prior=NoisePrior.from_config(spec.config.noise),
            student=student,
        )


@dataclass
class McEpisode:
    outcome: SimOutcome
    noise: np.ndarray | None


@dataclass
class PairedEpisode:
    """IDM and robust-planner runs on the same scenario, initial state and sensor noise."""

    index: int
    idm_rho: float
    idm_delayed: bool
    robust_rho: float
    robust_delayed: bool
    planning_steps: int
    rollout: list[RolloutStep] = field(default_factory=list)

    @property
    def idm_failed(self) -> bool:
        return self.idm_rho == 0.0

    @property
    def robust_failed(self) -> bool:
        return self.robust_rho == 0.0


def _draw_episode(context: CampaignContext, index: int) -> tuple[Any, Any, np.ndarray]:
    config = context.spec.config
    rng = rng_for(context.spec.seed, index)
    scenario = sample_scenario(context.spec.spawn, rng, config.idm.intruder_delta_range)
    s0 = sample_initial_state(context.simulator.world, scenario, config.world, rng)
    eps = context.prior.sample(rng, context.simulator.horizon)
    return scenario, s0, eps


def mc_episode(context: CampaignContext, index: int) -> McEpisode:
    """One prior-noise IDM simulation; the noise is kept only for failures."""
    scenario, s0, eps = _draw_episode(context, index)
    outcome = context.simulator.run_simulation(scenario, s0, eps)
    return McEpisode(outcome, eps if outcome.collided else None)


def paired_episode(context: CampaignContext, index: int) -> PairedEpisode:
    if context.student is None:
        raise ValueError("A planner campaign needs a failure sampler")
    config = context.spec.config
    scenario, s0, eps = _draw_episode(context, index)
    baseline = run_idm_baseline(context.simulator, scenario, s0, eps, config.planner.success_distance)
    robust = run_robust_planner(
        context.simulator, scenario, s0, eps, context.student, config, planner_rng(context.spec.seed, index)
    )
    return PairedEpisode(
        index=index,
        idm_rho=baseline.outcome.robustness,
        idm_delayed=baseline.delayed,
        robust_rho=robust.outcome.robustness,
        robust_delayed=robust.delayed,
        planning_steps=sum(step.phase != POLICY for step in robust.steps),
        rollout=robust.steps if index < LOGGED_ROLLOUTS else [],
    )


_WORKER_CONTEXT: CampaignContext | None = None


def _init_worker(spec: CampaignSpec) -> None:
    global _WORKER_CONTEXT
    _WORKER_CONTEXT = CampaignContext.build(spec)


def _run_in_worker(job: Callable[[CampaignContext, int], Any], index: int) -> Any:
    if _WORKER_CONTEXT is None:
        raise RuntimeError("Campaign worker is not initialised")
    return job(_WORKER_CONTEXT, index)


def run_indexed(
    job: Callable[[CampaignContext, int], Any],
    spec: CampaignSpec,
    count: int,
    workers: int = 1,
) -> Iterator[Any]:
    """
    Yield ``job(context, i)`` for i in 0..count-1, in order.

    Args:
        job: Module-level function (it is pickled into the workers).
        spec: Campaign description used to build each worker's context.
        count: Number of episodes.
        workers: Process count; 1 runs in the calling process.
    """
    if count < 0:
        raise ValueError(f"Episode count must be non-negative, got: {count}")
    if workers <= 1 or count <= 1:
        context = CampaignContext.build(spec)
        for index in range(count):
            yield job(context, index)
        return
    with ProcessPoolExecutor(
        max_workers=workers,
        mp_context=mp.get_context("spawn"),
        initializer=_init_worker,
        initargs=(spec,),
    ) as executor:
        yield from executor.map(_run_in_worker, [job] * count, range(count), chunksize=CHUNK_SIZE)


def run_mc_campaign(config: RunConfig, spawn: Branch, count: int, workers: int = 1) -> list[McEpisode]:
    spec = CampaignSpec(config, spawn, scenario_seed(config.campaign.seed, spawn))
    episodes = []
    for episode in run_indexed(mc_episode, spec, count, workers):
        episodes.append(episode)
        if len(episodes) % 10000 == 0:
            logger.debug(f"{spawn.label}: {len(episodes)}/{count} Monte Carlo episodes")
    failures = sum(e.outcome.collided for e in episodes)
    logger.info(f"Monte Carlo campaign {spawn.label}: {failures} failures in {count} simulations")
    return episodes


def run_plan_campaign(
    config: RunConfig, spawn: Branch, student_path: str, count: int, workers: int = 1
) -> list[PairedEpisode]:
    spec = CampaignSpec(config, spawn, scenario_seed(config.campaign.seed, spawn), student_path)
    episodes = list(run_indexed(paired_episode, spec, count, workers))
    logger.info(
        f"Planner campaign {spawn.label}: IDM {sum(e.idm_failed for e in episodes)} failures, "
        f"robust planner {sum(e.robust_failed for e in episodes)} failures in {count} pairs"
    )
    return episodes
