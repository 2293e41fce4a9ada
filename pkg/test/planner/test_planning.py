# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

import csv
import io
import itertools
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import numpy as np

from src.common.validation import PlannerConfig, RunConfig
from src.planner import (
    BeliefError,
    BeliefFilter,
    FailureSampleSet,
    PlanSolution,
    RobustPlannerPolicy,
    RolloutStep,
    audit_plan,
    build_plan_milp,
    check_psd,
    kalman_update,
    plan_regions,
    plausible_states,
    policy_phase_action,
    select_lowest,
    solve_plan,
    terminal_box,
    write_rollout_log,
)
from src.planner.regions import forward_signs, signed_interval
from src.planner.robust import IDM_FALLBACK, PLAN_FALLBACK, PLANNING, POLICY
from src.sim.geometry import Branch, build_world
from src.sim.world import IdmEgoPolicy, Simulator
from src.solver import SolveStatus, solve_lp
from test.utils import placed_state, straight_scenario

GAMMA = 0.0025


class TestKalman(unittest.TestCase):
    def test_single_update_matches_scalar_algebra(self):
        s = 0.01
        mean = np.array([0.1, -0.2, 0.3, 0.05])
        observation = np.array([0.3, -0.1, 0.25, 0.0])
        belief = BeliefFilter(mean, s * np.eye(4))
        posterior = kalman_update(belief, observation, GAMMA)

        predicted = np.array([mean[0] + 0.5 * mean[2] + 0.5 * observation[2], mean[1] + 0.5 * mean[3] + 0.5 * observation[3]])
        p = 1.25 * s + GAMMA / 4
        gain = p / (p + GAMMA)
        expected_position = predicted + gain * (observation[:2] - predicted)
        np.testing.assert_allclose(posterior.mean[:2], expected_position, atol=1e-9)
        np.testing.assert_allclose(posterior.mean[2:], observation[2:], atol=1e-12)
        np.testing.assert_allclose(posterior.covariance[:2, :2], (1 - gain) * p * np.eye(2), atol=1e-9)
        np.testing.assert_allclose(posterior.covariance[2:, 2:], GAMMA * np.eye(2), atol=1e-12)
        np.testing.assert_allclose(posterior.covariance[:2, 2:], 0.0)

    def test_precise_observation_dominates(self):
        belief = BeliefFilter(np.zeros(4), np.eye(4))
        observation = np.array([0.4, -0.3, 0.0, 0.0])
        posterior = kalman_update(belief, observation, 1e-12)
        np.testing.assert_allclose(posterior.mean[:2], observation[:2], atol=1e-9)

    def test_long_chain_stays_psd(self):
        rng = np.random.default_rng(0)
        belief = BeliefFilter.diffuse(np.array([0.0, 0.5, 0.0, -0.4]), GAMMA, sample_index=3)
        for _ in range(23):
            belief = kalman_update(belief, belief.mean + rng.normal(scale=0.05, size=4), GAMMA)
            check_psd(belief.covariance)
            self.assertGreaterEqual(np.linalg.eigvalsh(belief.covariance).min(), -1e-12)
        self.assertEqual(belief.source, "failure_sample_3")

    def test_rejects_invalid_covariance(self):
        with self.assertRaises(BeliefError):
            check_psd(np.diag([1.0, 1.0, -1.0, 1.0]))
        asymmetric = np.eye(4)
        asymmetric[0, 1] = 0.5
        with self.assertRaises(BeliefError):
            check_psd(asymmetric)
        with self.assertRaises(BeliefError):
            kalman_update(BeliefFilter(np.zeros(4), -np.eye(4)), np.zeros(4), GAMMA)

    def test_diffuse_belief(self):
        belief = BeliefFilter.diffuse(np.ones(4), GAMMA)
        np.testing.assert_allclose(belief.covariance, 3 * GAMMA * np.eye(4))
        self.assertEqual(belief.source, "observation")
        with self.assertRaises(BeliefError):
            BeliefFilter.diffuse(np.ones(3), GAMMA)


class TestPolicyPhase(unittest.TestCase):
    def test_plausible_states_brute_force(self):
        rng = np.random.default_rng(1)
        states = rng.uniform(-0.2, 0.2, size=(50, 4))
        observation = np.array([0.05, -0.02, 0.0, 0.0])
        expected = [s for s in states if np.hypot(s[0] - 0.05, s[1] + 0.02) <= 0.08]
        np.testing.assert_array_equal(plausible_states(states, observation, 0.08), np.array(expected).reshape(-1, 4))

    def test_lowest_action_over_plausible_samples(self):
        observation = np.array([0.0, 0.0, 0.0, 0.0])
        filters = [BeliefFilter(np.zeros(4), 1e-4 * np.eye(4)), BeliefFilter(np.array([0.01, 0.0, 0.0, 0.0]), 1e-4 * np.eye(4))]
        decision = policy_phase_action(filters, observation, lambda s: float(-s[0]), 10, 0.5, np.random.default_rng(2))
        self.assertFalse(decision.fallback)
        self.assertEqual(decision.plausible_count, 20)
        self.assertAlmostEqual(decision.acceleration, float(-decision.plausible[:, 0].max()))

    def test_fallback_to_observation_belief(self):
        observation = np.array([1.0, 1.0, 0.0, 0.0])
        filters = [BeliefFilter(np.array([0.5, 0.0, 0.1, 0.0]), 1e-6 * np.eye(4))]
        decision = policy_phase_action(filters, observation, lambda s: float(s[2]), 5, 0.01, np.random.default_rng(3))
        self.assertTrue(decision.fallback)
        self.assertEqual(decision.plausible_count, 0)
        self.assertAlmostEqual(decision.acceleration, 0.1)


class TestFailureSet(unittest.TestCase):
    def test_select_lowest_is_stable_sort(self):
        rho = np.array([0.3, 0.0, 0.2, 0.0, 0.5, 0.2])
        np.testing.assert_array_equal(select_lowest(rho, 4), [1, 3, 2, 5])
        rng = np.random.default_rng(4)
        values = rng.integers(0, 5, size=40).astype(float)
        np.testing.assert_array_equal(select_lowest(values, 10), sorted(range(40), key=lambda i: values[i])[:10])

    def test_window(self):
        fset = FailureSampleSet(np.zeros((2, 3, 4)), np.zeros(2), start_t=21)
        self.assertEqual(len(fset), 2)
        self.assertEqual(fset.end_t, 23)
        self.assertEqual(fset.positions_at(22).shape, (2, 2))
        with self.assertRaises(IndexError):
            fset.states_at(20)
        with self.assertRaises(ValueError):
            FailureSampleSet(np.zeros((2, 3, 4)), np.zeros(3), start_t=0)


class TestRegions(unittest.TestCase):
    def setUp(self):
        self.world = build_world(0.04, 1.0)
        self.config = PlannerConfig()

    def test_signed_interval(self):
        self.assertEqual(signed_interval(1, 0.5, 1e-3), (-1e-3, 0.5))
        self.assertEqual(signed_interval(-1, 0.5, 1e-3), (-0.5, 1e-3))
        self.assertEqual(signed_interval(0, 0.5, 1e-3), (-1e-3, 1e-3))

    def test_straight_route(self):
        route = self.world.route(Branch.SOUTH, Branch.NORTH)
        regions = plan_regions(self.world, route, self.config)
        self.assertEqual(regions.forward, (0, 1))
        self.assertEqual(regions.velocity, ((-1e-3, 1e-3), (-1e-3, 0.5)))
        self.assertEqual(regions.acceleration, ((-0.2, 0.2), (-0.2, 1.0)))
        self.assertEqual(len(regions.lanes), 1)
        np.testing.assert_allclose(regions.lanes[0], (0.0, 0.04, -1.0, 1.0), atol=1e-12)
        np.testing.assert_allclose(regions.terminal, (-0.04, 0.04, 0.14, 1.0))

    def test_turning_route(self):
        route = self.world.route(Branch.SOUTH, Branch.EAST)
        regions = plan_regions(self.world, route, self.config)
        self.assertEqual(forward_signs(route), (1, 1))
        self.assertEqual(len(regions.lanes), 2)
        self.assertTrue(regions.in_lane(np.array([0.02, -0.5])))
        self.assertTrue(regions.in_lane(np.array([0.5, -0.02])))
        self.assertFalse(regions.in_lane(np.array([-0.5, 0.5])))
        np.testing.assert_allclose(terminal_box(self.world, Branch.EAST, 0.1), (0.14, 1.0, -0.04, 0.04))


class TestPlanMilp(unittest.TestCase):
    """Two-step plans on the straight northbound lane against two failure samples."""

    def setUp(self):
        self.world = build_world(0.04, 1.0)
        route = self.world.route(Branch.SOUTH, Branch.NORTH)
        self.regions = plan_regions(self.world, route, PlannerConfig())
        self.o_t = np.array([0.02, -0.1, 0.0, 0.2, 0.3, 0.0, -0.1, 0.0])
        trajectories = np.zeros((2, 3, 4))
        trajectories[0, :, :2] = [(0.15, 0.0), (0.1, 0.05), (0.05, 0.1)]
        trajectories[1, :, :2] = [(-0.15, 0.3), (-0.1, 0.3), (-0.05, 0.3)]
        self.fset = FailureSampleSet(trajectories, np.zeros(2), start_t=21)

    def _solve(self, fset):
        return solve_plan(self.o_t, fset, 21, self.regions, horizon=23, diameter=self.world.diameter, node_limit=5000)

    def _orthant_enumeration(self) -> float:
        plan = build_plan_milp(self.o_t, self.fset, 21, self.regions, horizon=23, diameter=self.world.diameter)
        lp = plan.problem.lp
        orthants = plan.layout.orthant_indices()
        best = -np.inf
        for pattern in itertools.product((0.0, 1.0), repeat=len(orthants)):
            lower, upper = lp.lower.copy(), lp.upper.copy()
            lower[orthants] = upper[orthants] = pattern
            result = solve_lp(lp.with_bounds(lower, upper))
            if result.optimal:
                best = max(best, result.objective)
        return best

    def _grid_lower_bound(self) -> float:
        failures = self.fset.trajectories[:, 1:, :2]
        best = -np.inf
        for a0, a1 in itertools.product(np.linspace(-0.2, 1.0, 61), repeat=2):
            v1 = 0.2 + a0
            p1 = -0.1 + 0.2 + 0.5 * a0
            v2 = v1 + a1
            p2 = p1 + v1 + 0.5 * a1
            if not (-1e-3 <= v1 <= 0.5 and -1e-3 <= v2 <= 0.5 and 0.14 <= p2 <= 1.0):
                continue
            if (abs(v1) + abs(v2)) / 2 > 0.3:
                continue
            ys = np.array([p1, p2])
            separation = np.abs(0.02 - failures[:, :, 0]) + np.abs(ys[None, :] - failures[:, :, 1])
            best = max(best, float(separation.min()))
        return best

    def test_layout(self):
        plan = build_plan_milp(self.o_t, self.fset, 21, self.regions, horizon=23, diameter=self.world.diameter)
        self.assertEqual(plan.layout.num_vars, 8 * 2 + 1 + 2 * 2 * 2)
        self.assertEqual(len(plan.problem.integer), 8)
        self.assertGreaterEqual(plan.big_m, self.world.diameter)

    def test_matches_orthant_enumeration(self):
        solution = self._solve(self.fset)
        self.assertIs(solution.status, SolveStatus.OPTIMAL)
        self.assertAlmostEqual(solution.margin, self._orthant_enumeration(), delta=1e-6)
        self.assertAlmostEqual(solution.objective, solution.margin, delta=1e-6)
        self.assertGreaterEqual(solution.objective + 1e-9, self._grid_lower_bound())

    def test_plan_passes_audit(self):
        solution = self._solve(self.fset)
        self.assertEqual(audit_plan(solution, self.o_t, self.fset, self.regions), [])
        self.assertEqual(solution.actions.shape, (2, 2))
        np.testing.assert_allclose(solution.action_at(21), solution.actions[0])
        self.assertIsNone(solution.action_at(23))

    def test_extra_failure_never_raises_the_margin(self):
        single = FailureSampleSet(self.fset.trajectories[:1], self.fset.robustness[:1], start_t=21)
        self.assertLessEqual(self._solve(self.fset).objective, self._solve(single).objective + 1e-9)

    def test_audit_flags_broken_plan(self):
        solution = self._solve(self.fset)
        solution.waypoints[-1, 1] = -0.5
        self.assertTrue(audit_plan(solution, self.o_t, self.fset, self.regions))

    def test_rejects_short_failure_set(self):
        short = FailureSampleSet(np.zeros((1, 2, 4)), np.zeros(1), start_t=21)
        with self.assertRaises(ValueError):
            build_plan_milp(self.o_t, short, 21, self.regions, horizon=23)
        with self.assertRaises(ValueError):
            build_plan_milp(self.o_t, self.fset, 23, self.regions, horizon=23)


class TestRobustPlannerPolicy(unittest.TestCase):
    """Controller phases with the failure sampler and the plan MILP stubbed out."""

    def setUp(self):
        self.config = RunConfig(planner=PlannerConfig(total_samples=4, elite_samples=2))
        self.gamma = self.config.kalman_noise_scale
        self.simulator = Simulator.from_config(self.config)
        self.scenario = straight_scenario()
        self.far = placed_state(self.simulator, self.scenario, 0.6, 0.4, 0.4, 0.4)
        self.near = placed_state(self.simulator, self.scenario, 0.2, 0.4, 0.2, 0.4)

    def _policy(self) -> RobustPlannerPolicy:
        return RobustPlannerPolicy(self.simulator, self.scenario, None, self.config, np.random.default_rng(0))

    def _failure_set(self, t: int) -> FailureSampleSet:
        steps = self.simulator.horizon - t + 1
        trajectories = np.tile(self.far.intruder.as_array(), (2, steps, 1))
        trajectories[1, :, 0] += 0.01
        return FailureSampleSet(trajectories, np.zeros(2), start_t=t)

    def _sampler(self):
        return patch(
            "src.planner.robust.generate_failure_set",
            side_effect=lambda *args, **kwargs: self._failure_set(args[4]),
        )

    @staticmethod
    def _plan(t: int, steps: int) -> PlanSolution:
        actions = np.array([[0.0, 0.05 + 0.01 * k] for k in range(steps)])
        return PlanSolution(SolveStatus.OPTIMAL, t, actions, np.zeros((steps, 2)), np.zeros((steps, 2)), 0.3, 0.3)

    @staticmethod
    def _infeasible(t: int) -> PlanSolution:
        empty = np.zeros((0, 2))
        return PlanSolution(SolveStatus.INFEASIBLE, t, empty, empty, empty, None)

    def test_infeasible_without_previous_plan_uses_idm(self):
        observation = self.far.intruder.as_array()
        with self._sampler(), patch("src.planner.robust.solve_plan", return_value=self._infeasible(0)):
            policy = self._policy()
            with self.assertLogs("src.planner.robust", level="WARNING") as logs:
                action = policy(0, self.far.ego, observation)
        expected = IdmEgoPolicy(self.simulator, self.scenario).acceleration(self.far.ego, observation)
        self.assertAlmostEqual(action, expected)
        self.assertEqual([step.phase for step in policy.steps], [IDM_FALLBACK])
        self.assertIn("no previous plan", logs.output[0])
        self.assertIsNone(policy.plan)

    def test_infeasible_continues_previous_plan(self):
        observation = self.far.intruder.as_array()
        plan = self._plan(0, 3)
        with self._sampler(), patch("src.planner.robust.solve_plan", side_effect=[plan, self._infeasible(1)]):
            policy = self._policy()
            first = policy(0, self.far.ego, observation)
            second = policy(1, self.far.ego, observation)
        np.testing.assert_allclose(first, plan.actions[0])
        np.testing.assert_allclose(second, plan.actions[1])
        self.assertEqual([step.phase for step in policy.steps], [PLANNING, PLAN_FALLBACK])
        self.assertIs(policy.plan, plan)

    def test_exhausted_previous_plan_uses_idm(self):
        observation = self.far.intruder.as_array()
        with self._sampler(), patch("src.planner.robust.solve_plan", side_effect=[self._plan(0, 1), self._infeasible(1)]):
            policy = self._policy()
            policy(0, self.far.ego, observation)
            action = policy(1, self.far.ego, observation)
        self.assertIsInstance(action, float)
        self.assertEqual([step.phase for step in policy.steps], [PLANNING, IDM_FALLBACK])

    def test_policy_phase_starts_under_the_cutoff(self):
        observation = self.near.intruder.as_array()
        with self._sampler() as sampler, patch("src.planner.robust.solve_plan", return_value=self._plan(0, 23)) as solver:
            policy = self._policy()
            policy(0, self.far.ego, self.far.intruder.as_array())
            self.assertFalse(policy.in_policy_phase)
            action = policy(1, self.near.ego, observation)
            policy(2, self.far.ego, observation)
        self.assertTrue(policy.in_policy_phase)
        self.assertEqual(sampler.call_count, 1)
        self.assertEqual(solver.call_count, 1)
        self.assertIsInstance(action, float)
        self.assertEqual([step.phase for step in policy.steps], [PLANNING, POLICY, POLICY])
        self.assertEqual(len(policy.filters), 1 + 2)
        self.assertEqual([belief.source for belief in policy.filters], ["observation", "failure_sample_0", "failure_sample_1"])

    def test_first_policy_step_updates_fresh_beliefs(self):
        observation = self.near.intruder.as_array()
        with self._sampler(), patch("src.planner.robust.solve_plan", return_value=self._plan(0, 23)):
            policy = self._policy()
            policy(0, self.far.ego, self.far.intruder.as_array())
            policy(1, self.near.ego, observation)
        expected = kalman_update(BeliefFilter.diffuse(observation, self.gamma), observation, self.gamma)
        np.testing.assert_allclose(policy.filters[0].mean, expected.mean)
        np.testing.assert_allclose(policy.filters[0].covariance, expected.covariance)
        sample_state = policy.failures.states_at(1)[1]
        expected_sample = kalman_update(BeliefFilter.diffuse(sample_state, self.gamma, 1), sample_state, self.gamma)
        np.testing.assert_allclose(policy.filters[2].covariance, expected_sample.covariance)

    def test_policy_phase_without_failure_set_keeps_one_belief(self):
        observation = self.near.intruder.as_array()
        policy = self._policy()
        policy(0, self.near.ego, observation)
        self.assertEqual(len(policy.filters), 1)
        self.assertEqual([step.phase for step in policy.steps], [POLICY])


class TestRolloutLog(unittest.TestCase):
    def test_csv_columns(self):
        steps = [RolloutStep(3, "policy", np.zeros(4), np.ones(4), -0.25, 7)]
        with tempfile.TemporaryDirectory() as tmp:
            path = write_rollout_log(Path(tmp) / "rollouts" / "east_0.csv", steps)
            rows = list(csv.reader(io.StringIO(path.read_text())))
        self.assertEqual(rows[0][:2], ["timestep", "phase"])
        self.assertEqual(rows[1][0:2], ["3", "policy"])
        self.assertEqual(rows[1][-2:], ["-0.25", "7"])


if __name__ == "__main__":
    unittest.main()
