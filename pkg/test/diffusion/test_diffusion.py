# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

import tempfile
import unittest
from pathlib import Path

import numpy as np

from src.common.validation import DiffusionConfig
from src.diffusion import (
    ConditionEncoder,
    Conditioning,
    DenoiserModel,
    FailureRegimeUnreachable,
    ScheduleError,
    VarianceSchedule,
    build_denoiser,
    cosine_schedule,
    forward_diffuse,
    timestep_embedding,
    train_teacher,
)
from src.nn import build_mlp


def _config(**overrides) -> DiffusionConfig:
    values = dict(
        steps=10,
        percentiles=[100.0, 100.0],
        samples_per_round=16,
        updates_per_round=3,
        batch_size=8,
        hidden=8,
        blocks=1,
        time_embedding_dim=4,
    )
    values.update(overrides)
    return DiffusionConfig(**values)


def _model(parameterization: str = "noise", seed: int = 0) -> DenoiserModel:
    encoder = ConditionEncoder((0.0, 1.0), np.ones(2))
    return build_denoiser(3, encoder, _config(), prior_std=0.5, parameterization=parameterization, seed=seed)


class ToyEvaluator:
    """Two-dimensional noise; robustness shrinks as the noise grows."""

    noise_dim = 2
    cond_dim = 1
    prior_std = 1.0

    def sample_s0(self, rng):
        return rng.uniform(-1.0, 1.0, size=1)

    def s0_vector(self, case):
        return np.asarray(case, dtype=np.float64)

    def evaluate(self, case, eps):
        return float(max(0.0, 1.5 - np.linalg.norm(eps)))


class IncreasingEvaluator(ToyEvaluator):
    """Every evaluation is worse than all earlier ones."""

    def __init__(self):
        self.calls = 0

    def evaluate(self, case, eps):
        self.calls += 1
        return float(self.calls)


class TestSchedule(unittest.TestCase):
    def test_cosine_schedule(self):
        schedule = cosine_schedule(50)
        self.assertEqual(schedule.steps, 50)
        self.assertTrue(np.all(schedule.betas > 0))
        self.assertTrue(np.all(schedule.betas <= 0.999))
        bars = schedule.alpha_bars
        self.assertEqual(bars[0], 1.0)
        self.assertTrue(np.all(np.diff(bars) < 0))
        self.assertLess(bars[-1], 1e-3)
        np.testing.assert_allclose(bars[1:], np.cumprod(1 - schedule.betas))

    def test_single_step_schedule(self):
        schedule = cosine_schedule(1)
        self.assertEqual(schedule.steps, 1)
        self.assertAlmostEqual(schedule.betas[0], 0.999)

    def test_invalid_schedules(self):
        with self.assertRaises(ScheduleError):
            cosine_schedule(0)
        with self.assertRaises(ScheduleError):
            VarianceSchedule(np.array([0.5, 1.0]))
        with self.assertRaises(ScheduleError):
            cosine_schedule(5).check_step(6)

    def test_forward_diffuse(self):
        schedule = cosine_schedule(20)
        x0 = np.ones((4, 3))
        unchanged, _ = forward_diffuse(schedule, x0, 0, np.random.default_rng(0))
        np.testing.assert_array_equal(unchanged, x0)
        k = np.array([1, 5, 10, 20])
        x_k, z = forward_diffuse(schedule, x0, k, np.random.default_rng(1))
        bars = schedule.alpha_bars[k][:, None]
        np.testing.assert_allclose(x_k, np.sqrt(bars) * x0 + np.sqrt(1 - bars) * z)

    def test_timestep_embedding(self):
        embedding = timestep_embedding(np.array([0, 3]), 6)
        self.assertEqual(embedding.shape, (2, 6))
        np.testing.assert_allclose(embedding[0], [0, 0, 0, 1, 1, 1])
        np.testing.assert_allclose(embedding[1, 0], np.sin(3.0))


class TestConditionEncoder(unittest.TestCase):
    def test_rho_scaled_and_clipped(self):
        encoder = ConditionEncoder((0.0, 0.5), np.array([2.0]))
        features = encoder.encode(np.array([0.0, 0.25, 3.0]), np.array([[1.0], [2.0], [-4.0]]))
        np.testing.assert_allclose(features, [[-1.0, 0.5], [0.0, 1.0], [1.0, -2.0]])

    def test_relative_state(self):
        encoder = ConditionEncoder((0.0, 1.0), np.ones(8), relative_s0=True)
        s0 = np.arange(8, dtype=float)
        np.testing.assert_allclose(encoder.encode(0.0, s0)[0, 5:], [4.0, 4.0, 4.0, 4.0])
        self.assertEqual(ConditionEncoder.from_dict(encoder.to_dict()).to_dict(), encoder.to_dict())
        with self.assertRaises(ValueError):
            ConditionEncoder((0.0, 1.0), np.ones(3), relative_s0=True)


class TestDenoiser(unittest.TestCase):
    def test_parameterizations_share_the_reverse_mean(self):
        noise_model, sample_model = _model("noise"), _model("sample")
        rng = np.random.default_rng(2)
        x0, z = rng.normal(size=3), rng.normal(size=3)
        for k in (1, 2, 5, 10):
            bar = noise_model.schedule.alpha_bars[k]
            x_k = np.sqrt(bar) * x0 + np.sqrt(1 - bar) * z
            a_n, b_n = noise_model.mean_coefficients(k)
            a_s, b_s = sample_model.mean_coefficients(k)
            np.testing.assert_allclose(a_n * x_k + b_n * z, a_s * x_k + b_s * x0, rtol=1e-9, atol=1e-9)

    def test_sample_batch(self):
        model = _model()
        s0 = np.zeros((5, 2))
        first = model.sample_batch(np.zeros(5), s0, np.random.default_rng(3))
        second = model.sample_batch(np.zeros(5), s0, np.random.default_rng(3))
        self.assertEqual(first.shape, (5, 3))
        np.testing.assert_array_equal(first, second)
        self.assertTrue(np.all(np.isfinite(first)))

    def test_reverse_step(self):
        model = _model("sample", seed=6)
        x_k = np.random.default_rng(7).normal(size=(2, 3))
        s0 = np.zeros((2, 2))
        rho = np.zeros(2)
        a, b = model.mean_coefficients(1)
        np.testing.assert_allclose(
            model.reverse_step(x_k, 1, rho, s0, np.random.default_rng(0)),
            a * x_k + b * model.predict(x_k, 1, rho, s0),
        )
        np.testing.assert_allclose(a, 0.0, atol=1e-12)
        mean = model.reverse_mean(x_k, 5, rho, s0)
        draw = np.random.default_rng(8).standard_normal(mean.shape)
        np.testing.assert_allclose(
            model.reverse_step(x_k, 5, rho, s0, np.random.default_rng(8)),
            mean + np.sqrt(model.schedule.betas[4]) * draw,
        )
        with self.assertRaises(ScheduleError):
            model.reverse_step(x_k, 11, rho, s0, np.random.default_rng(0))

    def test_single_condition_sample(self):
        model = _model(seed=9)
        cond = Conditioning(0.0, np.array([0.5, -0.5]))
        single = model.sample(cond, np.random.default_rng(4))
        batch = model.sample_batch(np.zeros(1), cond.s0[None, :], np.random.default_rng(4))
        self.assertEqual(single.shape, (3,))
        np.testing.assert_array_equal(single, batch[0])
        with self.assertRaises(ValueError):
            Conditioning(-1.0, np.zeros(2))

    def test_save_and_load(self):
        model = _model("sample", seed=4)
        model.scenario = "east"
        model.history.append({"round": 0})
        with tempfile.TemporaryDirectory() as tmp:
            loaded = DenoiserModel.load(model.save(Path(tmp) / "teacher.cfnn"))
        self.assertEqual((loaded.scenario, loaded.parameterization, loaded.steps), ("east", "sample", 10))
        self.assertEqual(loaded.history, [{"round": 0}])
        s0 = np.ones((2, 2))
        np.testing.assert_array_equal(
            loaded.sample_batch(np.zeros(2), s0, np.random.default_rng(5)),
            model.sample_batch(np.zeros(2), s0, np.random.default_rng(5)),
        )

    def test_rejects_mismatched_network(self):
        model = _model()
        with self.assertRaises(ValueError):
            DenoiserModel(
                net=build_mlp([4, 3]),
                schedule=model.schedule,
                encoder=model.encoder,
                noise_dim=3,
                prior_std=1.0,
                data_scale=np.ones(3),
            )


class TestTeacherTraining(unittest.TestCase):
    def test_rounds_are_recorded(self):
        config = _config()
        model = train_teacher(ToyEvaluator(), config, seed=1, scenario="toy")
        self.assertEqual(len(model.history), 2)
        self.assertEqual(
            set(model.history[0]),
            {"round", "percentile", "threshold", "elite_count", "failures", "train_loss", "validation_loss"},
        )
        self.assertIsNone(model.history[0]["threshold"])
        self.assertIsNotNone(model.history[1]["threshold"])
        self.assertEqual(model.scenario, "toy")
        self.assertTrue(np.all(model.data_scale >= 1e-3))

    def test_training_is_deterministic(self):
        a = train_teacher(ToyEvaluator(), _config(), seed=3)
        b = train_teacher(ToyEvaluator(), _config(), seed=3)
        for p, q in zip(a.net.parameters(), b.net.parameters(), strict=True):
            np.testing.assert_array_equal(p, q)

    def test_unreachable_failure_regime(self):
        with self.assertRaises(FailureRegimeUnreachable):
            train_teacher(IncreasingEvaluator(), _config(percentiles=[100.0, 0.0]), seed=0)


if __name__ == "__main__":
    unittest.main()
