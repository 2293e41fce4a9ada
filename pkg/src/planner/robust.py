# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Closed-loop robust planner.

Far from the intersection the ego re-samples a failure set every step, solves
the plan MILP and executes the first planned acceleration. Once it is within
the cutoff distance it switches to the policy phase for the rest of the
episode: Kalman beliefs over the observation and the last failure set, and the
most conservative IDM action among plausible belief samples.
"""

import csv
import io
import logging
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..common.storage import write_bytes
from ..common.validation import RunConfig
from ..diffusion.denoiser import DenoiserModel
from ..sim.geometry import Branch, distance_to_intersection
from ..sim.outcomes import SimOutcome
from ..sim.scenario import InitialState, Scenario, VehicleState, snap_to_route
from ..sim.world import Acceleration, IdmEgoPolicy, Simulator
from .failures import FailureSampleSet, generate_failure_set
from .kalman import BeliefFilter, kalman_update
from .milp_plan import PlanSolution, solve_plan
from .policy import policy_phase_action
from .regions import plan_regions

logger = logging.getLogger(__name__)

PLANNING = "planning"
PLAN_FALLBACK = "plan_fallback"
IDM_FALLBACK = "idm_fallback"
POLICY = "policy"
ROLLOUT_COLUMNS = (
    "timestep",
    "phase",
    "ego_x",
    "ego_y",
    "ego_vx",
    "ego_vy",
    "obs_x",
    "obs_y",
    "obs_vx",
    "obs_vy",
    "value",
    "plausible",
)


@dataclass(frozen=True)
class RolloutStep:
    """One logged decision; ``value`` is the plan margin or the chosen IDM acceleration."""

    timestep: int
    phase: str
    ego: np.ndarray
    observation: np.ndarray
    value: float
    plausible: int = 0

    def row(self) -> list[str]:
        return (
            [str(self.timestep), self.phase]
            + [repr(float(v)) for v in self.ego]
            + [repr(float(v)) for v in self.observation]
            + [repr(float(self.value)), str(self.plausible)]
        )


@dataclass
class ControllerOutcome:
    outcome: SimOutcome
    delayed: bool
    steps: list[RolloutStep] = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return self.outcome.robustness == 0.0


class RobustPlannerPolicy:
    """Ego controller implementing both planner phases; pass to ``Simulator.run_simulation``."""

    def __init__(
        self,
        simulator: Simulator,
        scenario: Scenario,
        student: DenoiserModel,
        config: RunConfig,
        rng: np.random.Generator,
    ) -> None:
        self.simulator = simulator
        self.scenario = scenario
        self.student = student
        self.planner = config.planner
        self.gamma = config.kalman_noise_scale
        self.delta_range = config.idm.intruder_delta_range
        self.rng = rng
        self.route = scenario.ego_route(simulator.world)
        self.regions = plan_regions(simulator.world, self.route, config.planner)
        self.idm = IdmEgoPolicy(simulator, scenario)
        self.plan: PlanSolution | None = None
        self.failures: FailureSampleSet | None = None
        self.filters: list[BeliefFilter] | None = None
        self.steps: list[RolloutStep] = []

    @property
    def in_policy_phase(self) -> bool:
        return self.filters is not None

    def __call__(self, t: int, ego: VehicleState, observation: np.ndarray) -> Acceleration:
        distance = distance_to_intersection(self.route, ego.route_progress)
        if not self.in_policy_phase and distance >= self.planner.cutoff:
            return self._planning_step(t, ego, observation)
        return self._policy_step(t, ego, observation)

    def _coasting_positions(self, ego: VehicleState, steps: int) -> np.ndarray:
        snapped = snap_to_route(self.route, ego.x, ego.y, ego.vx, ego.vy)
        return np.array(
            [self.route.point_at(snapped.route_progress + snapped.speed * k) for k in range(1, steps + 1)]
        )

    def _planning_step(self, t: int, ego: VehicleState, observation: np.ndarray) -> Acceleration:
        o_t = np.concatenate([ego.as_array(), observation])
        self.failures = generate_failure_set(
            self.student,
            self.simulator,
            self.scenario,
            o_t,
            t,
            self.planner.total_samples,
            self.planner.elite_samples,
            self.rng,
            self.delta_range,
        )
        solution = solve_plan(
            o_t,
            self.failures,
            t,
            self.regions,
            horizon=self.simulator.horizon,
            diameter=self.simulator.world.diameter,
            node_limit=self.planner.node_limit,
            big_m=self.planner.big_m,
            seed_positions=self._coasting_positions(ego, self.simulator.horizon - t),
        )
        if solution.feasible:
            self.plan = solution
            self._log(t, PLANNING, ego, observation, solution.objective or 0.0)
            return solution.actions[0].copy()
        previous = self.plan.action_at(t) if self.plan is not None else None
        if previous is not None:
            logger.warning(f"Plan infeasible at t={t}; continuing the previous plan")
            self._log(t, PLAN_FALLBACK, ego, observation, float(np.hypot(*previous)))
            return previous.copy()
        logger.warning(f"Plan infeasible at t={t} with no previous plan; using IDM")
        accel = self.idm.acceleration(self._on_route(ego), observation)
        self._log(t, IDM_FALLBACK, ego, observation, accel)
        return accel

    def _on_route(self, ego: VehicleState) -> VehicleState:
        return snap_to_route(self.route, ego.x, ego.y, ego.vx, ego.vy) if ego.free else ego

    def _start_beliefs(self, t: int, observation: np.ndarray) -> list[BeliefFilter]:
        beliefs = [BeliefFilter.diffuse(observation, self.gamma)]
        if self.failures is not None and self.failures.start_t <= t <= self.failures.end_t:
            states = self.failures.states_at(t)
            beliefs += [BeliefFilter.diffuse(state, self.gamma, i) for i, state in enumerate(states)]
        return beliefs

    def _update_beliefs(self, t: int, observation: np.ndarray) -> list[BeliefFilter]:
        assert self.filters is not None
        updated = [kalman_update(self.filters[0], observation, self.gamma)]
        for belief in self.filters[1:]:
            assert self.failures is not None and belief.sample_index is not None
            sample_state = self.failures.states_at(t)[belief.sample_index]
            updated.append(kalman_update(belief, sample_state, self.gamma))
        return updated

    def _policy_step(self, t: int, ego: VehicleState, observation: np.ndarray) -> float:
        if self.filters is None:
            self.filters = self._start_beliefs(t, observation)
            logger.debug(f"Policy phase from t={t} with {len(self.filters)} beliefs")
        # fresh beliefs are updated with their own step's observation too
        self.filters = self._update_beliefs(t, observation)
        on_route = self._on_route(ego)
        decision = policy_phase_action(
            self.filters,
            observation,
            lambda state: self.idm.acceleration(on_route, state),
            self.planner.samples_per_filter,
            self.planner.eta,
            self.rng,
        )
        self._log(t, POLICY, ego, observation, decision.acceleration, decision.plausible_count)
        return decision.acceleration

    def _log(
        self, t: int, phase: str, ego: VehicleState, observation: np.ndarray, value: float, plausible: int = 0
    ) -> None:
        self.steps.append(RolloutStep(t, phase, ego.as_array(), np.asarray(observation, dtype=float), value, plausible))


def _student_for(students: Mapping[Branch, DenoiserModel] | DenoiserModel, spawn: Branch) -> DenoiserModel:
    if isinstance(students, DenoiserModel):
        return students
    try:
        return students[spawn]
    except KeyError:
        raise ValueError(f"No failure sampler available for the {spawn.label} scenario") from None


def run_robust_planner(
    simulator: Simulator,
    scenario: Scenario,
    s0: InitialState,
    eps: np.ndarray,
    students: Mapping[Branch, DenoiserModel] | DenoiserModel,
    config: RunConfig,
    rng: np.random.Generator,
) -> ControllerOutcome:
    """
    Run one episode with the robust planner as the ego controller.

    Args:
        simulator: The world.
        scenario: True scenario; the planner uses its intruder spawn and ego destination.
        s0: Initial vehicle states.
        eps: (horizon, 4) sensor noise of the episode.
        students: One-step failure samplers keyed by intruder spawn, or a single model.
        config: Run configuration (planner limits, noise scale, IDM exponent range).
        rng: Stream for failure sampling and belief draws.

    Returns:
        ControllerOutcome with the simulation, delay flag and per-step log.
    """
    policy = RobustPlannerPolicy(simulator, scenario, _student_for(students, scenario.intruder_spawn), config, rng)
    outcome = simulator.run_simulation(scenario, s0, eps, ego_policy=policy)
    delayed = not simulator.reached_destination(
        scenario, outcome.trajectory[-1, :2], config.planner.success_distance
    )
    return ControllerOutcome(outcome, delayed, policy.steps)


def run_idm_baseline(
    simulator: Simulator,
    scenario: Scenario,
    s0: InitialState,
    eps: np.ndarray,
    success_distance: float,
) -> ControllerOutcome:
    """The same episode driven by the plain IDM ego."""
    outcome = simulator.run_simulation(scenario, s0, eps)
    delayed = not simulator.reached_destination(scenario, outcome.trajectory[-1, :2], success_distance)
    return ControllerOutcome(outcome, delayed)


def encode_rollout_log(steps: list[RolloutStep]) -> bytes:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(ROLLOUT_COLUMNS)
    for step in steps:
        writer.writerow(step.row())
    return buffer.getvalue().encode("utf-8")


def write_rollout_log(path: str | Path, steps: list[RolloutStep]) -> Path:
    target = write_bytes(path, encode_rollout_log(steps))
    logger.info(f"Wrote {len(steps)}-step rollout log to {target}")
    return target
