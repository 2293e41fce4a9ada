# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

import math
import tempfile
import unittest
from pathlib import Path

import numpy as np

from src.common.storage import ArtifactFormatError
from src.diffusion import ConditionEncoder, build_denoiser, scenario_evaluator
from src.distill import (
    DistillationDiverged,
    build_discriminator,
    build_teacher_dataset,
    gan_distill,
    gan_losses,
    read_dataset,
    resimulate,
    student_beta,
    student_sample,
    supervised_pretrain,
    write_dataset,
)
from src.distill.dataset import decode_dataset, encode_dataset
from src.distill.gan import DivergenceGuard
from src.sim import Branch
from test.utils import tiny_config


class DistillFixture(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.config = tiny_config()
        cls.evaluator = scenario_evaluator(cls.config, "east")
        encoder = ConditionEncoder.for_vehicle_state(cls.config.diffusion)
        cls.teacher = build_denoiser(
            cls.evaluator.noise_dim, encoder, cls.config.diffusion, cls.evaluator.prior_std, scenario="east", seed=1
        )
        cls.dataset = build_teacher_dataset(cls.teacher, cls.evaluator, 12, np.random.default_rng(0), batch_size=5)

    def _student(self, seed: int = 2):
        return build_denoiser(
            self.evaluator.noise_dim,
            self.teacher.encoder,
            self.config.diffusion,
            self.evaluator.prior_std,
            steps=1,
            parameterization="sample",
            scenario="east",
            seed=seed,
        )


class TestTeacherDataset(DistillFixture):
    def test_records(self):
        self.assertEqual(len(self.dataset), 12)
        self.assertIs(self.dataset.spawn, Branch.EAST)
        eps, rho, s0 = self.dataset.arrays()
        self.assertEqual(eps.shape, (12, 92))
        self.assertEqual(s0.shape, (12, 8))
        self.assertTrue(np.all((rho >= 0) & np.isfinite(rho)))

    def test_records_resimulate_exactly(self):
        for record in self.dataset.records:
            self.assertEqual(resimulate(record, self.evaluator), record.rho)

    def test_file_round_trip(self):
        with tempfile.TemporaryDirectory() as tmp:
            loaded = read_dataset(write_dataset(Path(tmp) / "east.cftd", self.dataset))
        self.assertEqual(encode_dataset(loaded), encode_dataset(self.dataset))
        self.assertEqual(loaded.records[3].ego_destination, self.dataset.records[3].ego_destination)

    def test_corrupt_payloads(self):
        payload = bytearray(encode_dataset(self.dataset))
        with self.assertRaises(ArtifactFormatError):
            decode_dataset(bytes(payload[:-1]))
        payload[12] = 7
        with self.assertRaises(ArtifactFormatError):
            decode_dataset(bytes(payload))

    def test_split_is_deterministic_and_disjoint(self):
        train, held = self.dataset.split(0.25, seed=3)
        self.assertEqual((len(train), len(held)), (9, 3))
        again_train, _ = self.dataset.split(0.25, seed=3)
        self.assertEqual(encode_dataset(train), encode_dataset(again_train))
        ids = {id(r) for r in train.records} | {id(r) for r in held.records}
        self.assertEqual(len(ids), 12)

    def test_invalid_count(self):
        with self.assertRaises(ValueError):
            build_teacher_dataset(self.teacher, self.evaluator, 0, np.random.default_rng(0))


class TestGanLosses(unittest.TestCase):
    def test_even_discriminator(self):
        losses = gan_losses(np.full(4, 0.5), np.full(4, 0.5), np.zeros((4, 2)), np.ones((4, 2)), weight=0.5)
        self.assertAlmostEqual(losses.generator_adv, math.log(2))
        self.assertAlmostEqual(losses.discriminator_adv, 2 * math.log(2))
        self.assertAlmostEqual(losses.distill, 2.0)
        self.assertAlmostEqual(losses.total, math.log(2) + 1.0)
        self.assertEqual(losses.saturated, 0)

    def test_saturated_probabilities_are_clamped(self):
        losses = gan_losses(np.array([1.0, 0.5]), np.array([0.0, 0.5]), np.zeros((1, 1)), np.zeros((1, 1)))
        self.assertEqual(losses.saturated, 2)
        self.assertTrue(math.isfinite(losses.generator_adv))
        self.assertTrue(math.isfinite(losses.discriminator_adv))

    def test_divergence_guard(self):
        guard = DivergenceGuard(factor=2.0, patience=2, window=10)
        guard.update(1.0)
        guard.update(1.0)
        guard.update(5.0)
        guard.update(1.0)
        guard.update(5.0)
        with self.assertRaises(DistillationDiverged):
            guard.update(5.0)


class TestStudentDistillation(DistillFixture):
    def test_student_beta(self):
        self.assertAlmostEqual(student_beta(self.config.distill), 0.999)

    def test_student_sample_needs_one_step(self):
        with self.assertRaises(ValueError):
            student_sample(self.teacher, np.zeros(1), np.zeros((1, 8)), np.random.default_rng(0))
        out = student_sample(self._student(), np.zeros(3), self.dataset.arrays()[2][:3], np.random.default_rng(0))
        self.assertEqual(out.shape, (3, 92))

    def test_supervised_pretrain_history(self):
        train, held = self.dataset.split(0.25)
        history = supervised_pretrain(self._student(), train, self.config.distill, seed=0, validation=held)
        self.assertEqual(len(history), 2)
        self.assertTrue(all(math.isfinite(v) for v in history))

    def test_gan_distill_keeps_best_parameters(self):
        train, held = self.dataset.split(0.25)
        student = self._student()
        initial = [p.copy() for p in student.net.parameters()]
        disc = build_discriminator(student.noise_dim, self.config.distill, student.encoder, seed=0)
        self.assertFalse(disc.conditional)
        result = gan_distill(student, disc, self.teacher, train, self.config.distill, validation=held, seed=0)
        self.assertEqual([entry["iteration"] for entry in result.history], [2, 4])
        # three held-out records are too few for k = 5 scores, so nothing beats the initial parameters
        self.assertEqual((result.best_iteration, result.best_score), (0, 0.0))
        for p, q in zip(result.student.net.parameters(), initial, strict=True):
            np.testing.assert_array_equal(p, q)
        self.assertEqual(student.history[-1]["gan_best_iteration"], 0)


if __name__ == "__main__":
    unittest.main()
