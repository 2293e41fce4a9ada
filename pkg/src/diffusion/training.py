# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Teacher training: cross-entropy-style rounds of sampling, simulation and regression.

Round 0 draws noise from the prior; every later round samples the current model
at a robustness threshold given by a percentile of everything observed so far.
After each round the denoiser is regressed on all (noise, achieved robustness,
s0) triples collected so far.
"""

import logging
from dataclasses import dataclass
from typing import Any, Protocol

import numpy as np

from ..common.validation import DiffusionConfig, IDMConfig, WorldConfig
from ..nn import AdamWState, adamw_step
from ..sim import (
    Branch,
    InitialState,
    NoisePrior,
    Scenario,
    Simulator,
    initial_state_from_vector,
    sample_initial_state,
    sample_scenario,
    state_vector,
)
from .conditioning import ConditionEncoder
from .denoiser import DenoiserModel, build_denoiser
from .schedule import VarianceSchedule, forward_diffuse

logger = logging.getLogger(__name__)

VALIDATION_BATCH = 256


class FailureRegimeUnreachable(RuntimeError):
    """Raised when a training round produces no sample at or below its threshold."""

    pass


class Evaluator(Protocol):
    """A black-box system under test: draws initial conditions and scores noise."""

    noise_dim: int
    cond_dim: int
    prior_std: float

    def sample_s0(self, rng: np.random.Generator) -> Any: ...

    def s0_vector(self, case: Any) -> np.ndarray: ...

    def evaluate(self, case: Any, eps: np.ndarray) -> float: ...


@dataclass(frozen=True)
class ScenarioCase:
    scenario: Scenario
    initial: InitialState
    s0: np.ndarray


class ScenarioEvaluator:
    """
    Evaluator backed by the intersection simulator for one intruder spawn.

    Noise and s0 are rounded to float32 before simulating so that stored
    records re-simulate to the same robustness.
    """

    def __init__(
        self,
        simulator: Simulator,
        spawn: Branch,
        prior: NoisePrior,
        world_config: WorldConfig,
        idm_config: IDMConfig,
    ) -> None:
        self.simulator = simulator
        self.spawn = spawn
        self.prior_std = prior.std
        self.world_config = world_config
        self.delta_range = idm_config.intruder_delta_range
        self.noise_dim = simulator.horizon * 4
        self.cond_dim = 8

    def case_for(self, scenario: Scenario, s0: np.ndarray) -> ScenarioCase:
        s0 = np.asarray(s0, dtype=np.float32).astype(np.float64)
        scenario = Scenario(
            intruder_spawn=scenario.intruder_spawn,
            intruder_destination=scenario.intruder_destination,
            ego_destination=scenario.ego_destination,
            intruder_idm_delta=float(np.float32(scenario.intruder_idm_delta)),
        )
        initial = initial_state_from_vector(self.simulator.world, scenario, s0)
        return ScenarioCase(scenario=scenario, initial=initial, s0=s0)

    def sample_s0(self, rng: np.random.Generator) -> ScenarioCase:
        scenario = sample_scenario(self.spawn, rng, self.delta_range)
        initial = sample_initial_state(self.simulator.world, scenario, self.world_config, rng)
        return self.case_for(scenario, state_vector(initial))

    def s0_vector(self, case: ScenarioCase) -> np.ndarray:
        return case.s0

    def evaluate(self, case: ScenarioCase, eps: np.ndarray) -> float:
        noise = np.asarray(eps, dtype=np.float32).astype(np.float64).reshape(self.simulator.horizon, 4)
        return self.simulator.run_simulation(case.scenario, case.initial, noise).robustness


def scenario_evaluator(config, spawn: Branch | str, simulator: Simulator | None = None) -> ScenarioEvaluator:
    """Evaluator for ``spawn`` built from a RunConfig."""
    simulator = simulator or Simulator.from_config(config)
    return ScenarioEvaluator(
        simulator=simulator,
        spawn=Branch.parse(spawn),
        prior=NoisePrior.from_config(config.noise),
        world_config=config.world,
        idm_config=config.idm,
    )


def regression_step(
    model: DenoiserModel,
    optimizer: AdamWState,
    x0: np.ndarray,
    rho: np.ndarray,
    s0: np.ndarray,
    rng: np.random.Generator,
) -> float:
    """
    One AdamW step on the denoising regression loss.

    The target is the injected noise for the "noise" parameterization and the
    clean sample for "sample".
    """
    k = rng.integers(1, model.steps + 1, size=x0.shape[0])
    x_k, z = forward_diffuse(model.schedule, x0, k, rng)
    target = z if model.parameterization == "noise" else x0
    out, caches = model.net.forward_with_cache(model.net_input(x_k, k, rho, s0))
    residual = out.astype(np.float64) - target
    loss = float(np.mean(residual**2))
    grad = 2.0 * residual / residual.size
    _, grads = model.net.backward(caches, grad)
    adamw_step(optimizer, model.net.parameters(), grads)
    return loss


def regression_loss(
    model: DenoiserModel, x0: np.ndarray, rho: np.ndarray, s0: np.ndarray, seed: int = 0
) -> float:
    """Loss on a fixed batch with a fixed draw of steps and noise."""
    rng = np.random.default_rng(seed)
    k = rng.integers(1, model.steps + 1, size=x0.shape[0])
    x_k, z = forward_diffuse(model.schedule, x0, k, rng)
    target = z if model.parameterization == "noise" else x0
    return float(np.mean((model.predict(x_k, k, rho, s0) - target) ** 2))


def fit_denoiser(
    model: DenoiserModel,
    optimizer: AdamWState,
    x0: np.ndarray,
    rho: np.ndarray,
    s0: np.ndarray,
    updates: int,
    batch_size: int,
    rng: np.random.Generator,
) -> float:
    """Minibatch regression on a fixed dataset; returns the mean loss of the last updates."""
    losses = []
    for _ in range(updates):
        idx = rng.integers(0, x0.shape[0], size=min(batch_size, x0.shape[0]))
        losses.append(regression_step(model, optimizer, x0[idx], rho[idx], s0[idx], rng))
    tail = losses[-min(len(losses), 50) :] if losses else [float("nan")]
    return float(np.mean(tail))


def collect_round(
    model: DenoiserModel,
    evaluator: Evaluator,
    count: int,
    threshold: float | None,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw cases, sample noise (prior when ``threshold`` is None) and simulate."""
    cases = [evaluator.sample_s0(rng) for _ in range(count)]
    s0 = np.stack([evaluator.s0_vector(case) for case in cases])
    if threshold is None:
        eps = evaluator.prior_std * rng.standard_normal((count, evaluator.noise_dim))
    else:
        eps = model.sample_batch(np.full(count, threshold), s0, rng)
    eps = eps.astype(np.float32).astype(np.float64)
    rho = np.array([evaluator.evaluate(case, e) for case, e in zip(cases, eps, strict=True)])
    return eps, rho, s0


def train_teacher(
    evaluator: Evaluator,
    config: DiffusionConfig,
    seed: int = 0,
    scenario: str = "",
    steps: int | None = None,
    parameterization: str | None = None,
    encoder: ConditionEncoder | None = None,
    budget_fraction: float = 1.0,
    schedule: VarianceSchedule | None = None,
    data_scale: np.ndarray | None = None,
) -> DenoiserModel:
    """
    Train a conditional denoiser by annealed percentile rounds.

    Args:
        evaluator: System under test.
        config: Architecture, round sizes and optimiser settings.
        seed: Seed for network initialisation, sampling and minibatches.
        scenario: Tag stored with the model.
        steps: Diffusion step count (defaults to ``config.steps``).
        parameterization: Network target (defaults to ``config.parameterization``).
        encoder: Condition encoder; the vehicle-state encoder when omitted.
        budget_fraction: Scales samples and updates per round (students use a reduced budget).
        schedule: Explicit variance schedule, overriding ``steps``.
        data_scale: Fixed normalisation scale; computed from the prior round when omitted.

    Raises:
        FailureRegimeUnreachable: if a round yields no sample at or below its threshold.
    """
    rng = np.random.default_rng(seed)
    if encoder is None:
        encoder = (
            ConditionEncoder.for_vehicle_state(config)
            if evaluator.cond_dim == 8
            else ConditionEncoder(tuple(config.rho_bounds), np.ones(evaluator.cond_dim))  # type: ignore[arg-type]
        )
    model = build_denoiser(
        evaluator.noise_dim,
        encoder,
        config,
        evaluator.prior_std,
        steps=steps,
        parameterization=parameterization,
        scenario=scenario,
        seed=seed,
    )
    if schedule is not None:
        model.schedule = schedule
    optimizer = AdamWState.for_parameters(model.net.parameters(), config.learning_rate, config.weight_decay)
    samples = max(1, int(round(config.samples_per_round * budget_fraction)))
    updates = max(1, int(round(config.updates_per_round * budget_fraction)))

    eps_all = np.zeros((0, evaluator.noise_dim))
    rho_all = np.zeros(0)
    s0_all = np.zeros((0, evaluator.cond_dim))
    validation: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    for round_index, percentile in enumerate(config.percentiles):
        threshold = None if round_index == 0 else float(np.percentile(rho_all, percentile))
        eps, rho, s0 = collect_round(model, evaluator, samples, threshold, rng)
        elite = int(np.sum(rho <= threshold)) if threshold is not None else samples
        if threshold is not None and elite == 0:
            logger.error(
                f"Round {round_index} of {scenario or 'teacher'}: no sample reached rho <= {threshold:.4g}"
            )
            raise FailureRegimeUnreachable(
                f"Round {round_index}: none of {samples} samples reached robustness <= {threshold:.4g}"
            )
        if round_index == 0:
            if data_scale is not None:
                model.data_scale = np.asarray(data_scale, dtype=np.float64).copy()
            else:
                model.data_scale = np.maximum((eps / evaluator.prior_std).std(axis=0), 1e-3)
        eps_all = np.vstack([eps_all, eps])
        rho_all = np.concatenate([rho_all, rho])
        s0_all = np.vstack([s0_all, s0])

        x0 = model.normalize(eps_all)
        if validation is None:
            size = min(VALIDATION_BATCH, x0.shape[0])
            validation = (x0[:size].copy(), rho_all[:size].copy(), s0_all[:size].copy())
        train_loss = fit_denoiser(model, optimizer, x0, rho_all, s0_all, updates, config.batch_size, rng)
        validation_loss = regression_loss(model, *validation, seed=seed)
        record = {
            "round": round_index,
            "percentile": percentile,
            "threshold": threshold,
            "elite_count": elite,
            "failures": int(np.sum(rho == 0.0)),
            "train_loss": train_loss,
            "validation_loss": validation_loss,
        }
        model.history.append(record)
        logger.info(
            f"Round {round_index} ({scenario or 'teacher'}): threshold {threshold}, "
            f"{elite} elite, {record['failures']} failures, validation loss {validation_loss:.4f}"
        )
    return model
