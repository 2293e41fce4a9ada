# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

import inspect
import json
import tempfile
import unittest
from pathlib import Path

from src.common.config import config_digest, echo_config, resolve_config
from src.common.validation import (
    CampaignConfig,
    ConfigurationError,
    ConfigValidator,
    DiffusionConfig,
    DistillConfig,
    NoiseConfig,
    PlannerConfig,
    RunConfig,
    WorldConfig,
    config_from_dict,
    load_validated_config,
)
from src.planner import solve_plan
from src.solver.milp import NODE_LIMIT
from test.utils import MockEnvironment

_CLEAN_ENV = {
    "CFS_SEED": "0",
    "CFS_WORKERS": "1",
    "CFS_LOG_LEVEL": "INFO",
    "CFS_NOISE_GAMMA": str(1.0 / 0.15),
    "CFS_NOISE_INFLATION": "1.0",
    "CFS_NOISE_GAMMA_IS_PRECISION": "false",
}


class TestSections(unittest.TestCase):
    def test_world_defaults(self):
        world = WorldConfig()
        self.assertEqual(world.horizon, 23)
        self.assertEqual(world.collision_radius_sum, world.lane_width)

    def test_world_rejects_short_branches(self):
        with self.assertRaises(ValueError) as context:
            WorldConfig(branch_length=0.5)
        self.assertIn("branch_length", str(context.exception))

    def test_noise_variance(self):
        self.assertAlmostEqual(NoiseConfig(gamma=0.01).variance, 0.01)
        self.assertAlmostEqual(NoiseConfig(gamma=100.0, gamma_is_precision=True).variance, 0.01)
        self.assertAlmostEqual(NoiseConfig(gamma=0.01, inflation=2.0).variance, 0.04)
        with self.assertRaises(ValueError):
            NoiseConfig(gamma=0.0)

    def test_diffusion_checks(self):
        with self.assertRaises(ValueError):
            DiffusionConfig(percentiles=[50.0, 120.0])
        with self.assertRaises(ValueError):
            DiffusionConfig(time_embedding_dim=3)
        with self.assertRaises(ValueError) as context:
            DiffusionConfig(parameterization="velocity")
        self.assertIn("Invalid parameterization", str(context.exception))

    def test_distill_checks(self):
        with self.assertRaises(ValueError):
            DistillConfig(student_beta=1.0)
        with self.assertRaises(ValueError):
            DistillConfig(validation_fraction=0.0)

    def test_planner_elite_bound(self):
        with self.assertRaises(ValueError) as context:
            PlannerConfig(total_samples=4, elite_samples=5)
        self.assertIn("cannot exceed", str(context.exception))

    def test_planner_node_limit_matches_solver_cap(self):
        self.assertEqual(PlannerConfig().node_limit, NODE_LIMIT)
        self.assertEqual(inspect.signature(solve_plan).parameters["node_limit"].default, NODE_LIMIT)
        self.assertEqual(NODE_LIMIT, 10_000)
        with self.assertRaises(ValueError):
            PlannerConfig(node_limit=0)

    def test_campaign_checks(self):
        with self.assertRaises(ValueError):
            CampaignConfig(scenarios=["up"])
        with self.assertRaises(ValueError):
            CampaignConfig(scenarios=[])
        with self.assertRaises(ValueError):
            CampaignConfig(workers=0)
        self.assertEqual(CampaignConfig(log_level="debug").log_level, "DEBUG")

    def test_kalman_noise_scale_follows_prior(self):
        config = RunConfig(noise=NoiseConfig(gamma=0.02))
        self.assertAlmostEqual(config.kalman_noise_scale, 0.02)
        config.planner.kalman_noise_scale = 0.5
        self.assertEqual(config.kalman_noise_scale, 0.5)


class TestConfigValidator(unittest.TestCase):
    def test_empty_document_gives_defaults(self):
        self.assertEqual(ConfigValidator.parse_config("").to_json(), RunConfig().to_json())

    def test_partial_sections(self):
        config = ConfigValidator.parse_config('{"campaign": {"seed": 9, "scenarios": ["west"]}}')
        self.assertEqual(config.campaign.seed, 9)
        self.assertEqual(config.campaign.scenarios, ["west"])
        self.assertEqual(config.world.horizon, 23)

    def test_invalid_documents(self):
        for text in ("{", "[1, 2]", '{"sensors": {}}', '{"world": 3}', '{"world": {"width": 1}}', '{"noise": {"gamma": -1}}'):
            with self.subTest(text=text):
                with self.assertRaises(ConfigurationError):
                    ConfigValidator.parse_config(text)

    def test_env_int(self):
        with MockEnvironment({"TEST_INT": "42"}):
            self.assertEqual(ConfigValidator.get_env_int("TEST_INT", 0), 42)
        with MockEnvironment({"TEST_INT": "abc"}):
            with self.assertRaises(ConfigurationError):
                ConfigValidator.get_env_int("TEST_INT", 0)
        with MockEnvironment({"TEST_INT": "5"}):
            with self.assertRaises(ConfigurationError):
                ConfigValidator.get_env_int("TEST_INT", 0, min_val=10)

    def test_env_bool(self):
        for value, expected in (("true", True), ("1", True), ("on", True), ("false", False), ("nope", False)):
            with MockEnvironment({"TEST_BOOL": value}):
                self.assertEqual(ConfigValidator.get_env_bool("TEST_BOOL"), expected)

    def test_env_overrides(self):
        env = dict(_CLEAN_ENV, CFS_SEED="11", CFS_NOISE_GAMMA="0.15", CFS_NOISE_INFLATION="2.0", CFS_WORKERS="3")
        with MockEnvironment(env):
            config = ConfigValidator.load_config()
        self.assertEqual(config.campaign.seed, 11)
        self.assertEqual(config.campaign.workers, 3)
        self.assertAlmostEqual(config.noise.variance, 0.6)

    def test_invalid_env_override(self):
        with MockEnvironment(dict(_CLEAN_ENV, CFS_LOG_LEVEL="LOUD")):
            with self.assertRaises(ConfigurationError):
                load_validated_config()


class TestResolveConfig(unittest.TestCase):
    def test_file_then_flags(self):
        with tempfile.TemporaryDirectory() as tmp, MockEnvironment(_CLEAN_ENV):
            path = Path(tmp) / "run.json"
            path.write_text(json.dumps({"campaign": {"seed": 3, "mc_count": 10}}))
            config = resolve_config(path, scenarios=["north"], out=str(Path(tmp) / "out"))
            self.assertEqual(config.campaign.seed, 3)
            self.assertEqual(config.campaign.mc_count, 10)
            self.assertEqual(config.campaign.scenarios, ["north"])
            overridden = resolve_config(path, seed=4)
            self.assertEqual(overridden.campaign.seed, 4)

    def test_invalid_flags(self):
        with MockEnvironment(_CLEAN_ENV):
            with self.assertRaises(ConfigurationError):
                resolve_config(seed=-1)
            with self.assertRaises(ConfigurationError):
                resolve_config(workers=0)
            with self.assertRaises(ConfigurationError):
                resolve_config(scenarios=["up"])

    def test_missing_file(self):
        with self.assertRaises(ConfigurationError):
            resolve_config("/nonexistent/run.json")

    def test_echo_round_trip(self):
        config = RunConfig(campaign=CampaignConfig(seed=5, scenarios=["south"]))
        with tempfile.TemporaryDirectory() as tmp:
            path = echo_config(config, tmp)
            restored = config_from_dict(json.loads(path.read_text()))
        self.assertEqual(restored.to_json(), config.to_json())
        self.assertEqual(config_digest(restored), config_digest(config))
        self.assertNotEqual(config_digest(restored), config_digest(RunConfig()))


if __name__ == "__main__":
    unittest.main()
