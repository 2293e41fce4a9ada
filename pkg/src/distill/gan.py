# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Adversarial distillation of a one-step student.

Each iteration takes one discriminator step on the real/fake classification
loss, then one generator step on the adversarial loss plus the distillation
loss against the teacher's clean estimate of the diffused student output.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import expit

from ..common.validation import DistillConfig
from ..diffusion import ConditionEncoder, DenoiserModel, forward_diffuse
from ..metrics.manifold import coverage, density
from ..nn import AdamWState, Network, adamw_step, build_residual_net
from .dataset import TeacherDataset
from .student import DistillationDiverged, reconstruct

logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-7
VALIDATION_K = 5


@dataclass
class Discriminator:
    """Residual block plus a linear score head; outputs a logit."""

    net: Network
    noise_dim: int
    encoder: ConditionEncoder | None = None

    @property
    def conditional(self) -> bool:
        return self.encoder is not None

    def features(self, x: np.ndarray, s0: np.ndarray) -> np.ndarray:
        if self.encoder is None:
            return x
        return np.concatenate([x, self.encoder.encode(np.zeros(x.shape[0]), s0)], axis=1)

    def logits_with_cache(self, x: np.ndarray, s0: np.ndarray) -> tuple[np.ndarray, list[Any]]:
        out, caches = self.net.forward_with_cache(self.features(x, s0))
        return out[:, 0].astype(np.float64), caches

    def probabilities(self, x: np.ndarray, s0: np.ndarray) -> np.ndarray:
        return expit(self.logits_with_cache(x, s0)[0])

    def input_gradient(self, caches: list[Any], grad_logits: np.ndarray) -> np.ndarray:
        grad_input, _ = self.net.backward(caches, grad_logits[:, None])
        return grad_input[:, : self.noise_dim].astype(np.float64)


def build_discriminator(
    noise_dim: int,
    config: DistillConfig,
    encoder: ConditionEncoder | None = None,
    seed: int = 0,
) -> Discriminator:
    condition = encoder if config.conditional_discriminator else None
    input_dim = noise_dim + (condition.dim if condition is not None else 0)
    net = build_residual_net(input_dim, config.discriminator_hidden, 1, 1, seed=seed, final_scale=1.0)
    return Discriminator(net=net, noise_dim=noise_dim, encoder=condition)


@dataclass(frozen=True)
class GanLosses:
    generator_adv: float
    discriminator_adv: float
    distill: float
    total: float
    saturated: int


def gan_losses(
    real_prob: np.ndarray,
    fake_prob: np.ndarray,
    student_out: np.ndarray,
    teacher_recon: np.ndarray,
    weight: float = 1.0,
) -> GanLosses:
    """
    Loss values from discriminator probabilities and generator outputs.

    Probabilities are clamped to [1e-7, 1 - 1e-7] before taking logs; the number
    of clamped entries is reported as ``saturated``.
    """
    real_prob = np.atleast_1d(np.asarray(real_prob, dtype=np.float64))
    fake_prob = np.atleast_1d(np.asarray(fake_prob, dtype=np.float64))
    saturated = int(
        np.sum((real_prob < PROB_FLOOR) | (real_prob > 1 - PROB_FLOOR))
        + np.sum((fake_prob < PROB_FLOOR) | (fake_prob > 1 - PROB_FLOOR))
    )
    real = np.clip(real_prob, PROB_FLOOR, 1 - PROB_FLOOR)
    fake = np.clip(fake_prob, PROB_FLOOR, 1 - PROB_FLOOR)
    generator_adv = float(np.mean(-np.log(fake)))
    discriminator_adv = float(np.mean(-np.log(1 - fake) - np.log(real)))
    diff = np.atleast_2d(np.asarray(student_out, dtype=np.float64) - np.asarray(teacher_recon, dtype=np.float64))
    distill = float(np.mean(np.sum(diff**2, axis=1)))
    return GanLosses(
        generator_adv=generator_adv,
        discriminator_adv=discriminator_adv,
        distill=distill,
        total=generator_adv + weight * distill,
        saturated=saturated,
    )


def teacher_target(
    teacher: DenoiserModel, student_out: np.ndarray, s0: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Teacher's one-call clean estimate after diffusing the student output to a uniform step."""
    k = rng.integers(1, teacher.steps + 1, size=student_out.shape[0])
    noised, _ = forward_diffuse(teacher.schedule, student_out, k, rng)
    return teacher.predict_x0(noised, k, np.zeros(student_out.shape[0]), s0)


def discriminator_step(
    disc: Discriminator,
    optimizer: AdamWState,
    real: np.ndarray,
    fake: np.ndarray,
    s0: np.ndarray,
) -> tuple[float, int]:
    """One step on -log(1 - M(fake)) - log M(real); gradients use the logit form."""
    batch = real.shape[0]
    logits, caches = disc.logits_with_cache(np.vstack([real, fake]), np.vstack([s0, s0]))
    real_logits, fake_logits = logits[:batch], logits[batch:]
    losses = gan_losses(expit(real_logits), expit(fake_logits), np.zeros((1, 1)), np.zeros((1, 1)))
    grad = np.concatenate([expit(real_logits) - 1.0, expit(fake_logits)]) / batch
    _, grads = disc.net.backward(caches, grad[:, None])
    adamw_step(optimizer, disc.net.parameters(), grads)
    return losses.discriminator_adv, losses.saturated


def generator_step(
    student: DenoiserModel,
    disc: Discriminator,
    teacher: DenoiserModel,
    optimizer: AdamWState,
    x0: np.ndarray,
    s0: np.ndarray,
    rng: np.random.Generator,
    weight: float = 1.0,
) -> GanLosses:
    """One student step on -log M(fake) + weight * ||fake - teacher estimate||^2."""
    batch = x0.shape[0]
    recon, caches, b = reconstruct(student, x0, s0, rng)
    fake_logits, disc_caches = disc.logits_with_cache(recon, s0)
    target = teacher_target(teacher, recon, s0, rng)
    losses = gan_losses(expit(disc.logits_with_cache(x0, s0)[0]), expit(fake_logits), recon, target, weight)
    if not np.isfinite(losses.total):
        raise DistillationDiverged(f"Generator loss became non-finite ({losses.total})")
    grad_recon = disc.input_gradient(disc_caches, (expit(fake_logits) - 1.0) / batch)
    grad_recon += weight * 2.0 * (recon - target) / batch
    _, grads = student.net.backward(caches, b * grad_recon)
    adamw_step(optimizer, student.net.parameters(), grads)
    return losses


def validation_score(
    student: DenoiserModel, validation: TeacherDataset, seed: int, k: int = VALIDATION_K
) -> float:
    """density x coverage of student samples against held-out teacher samples (normalised noise space)."""
    eps, _, s0 = validation.arrays()
    if eps.shape[0] <= k:
        return 0.0
    fake = student.normalize(student.sample_batch(np.zeros(s0.shape[0]), s0, np.random.default_rng(seed)))
    real = student.normalize(eps)
    return density(real, fake, k) * coverage(real, fake, k)


def discriminator_accuracy(disc: Discriminator, real: np.ndarray, fake: np.ndarray, s0: np.ndarray) -> float:
    correct = np.sum(disc.probabilities(real, s0) >= 0.5) + np.sum(disc.probabilities(fake, s0) < 0.5)
    return float(correct) / (2 * real.shape[0])


@dataclass
class DistillResult:
    student: DenoiserModel
    discriminator: Discriminator
    best_iteration: int
    best_score: float
    saturated: int
    history: list[dict[str, Any]] = field(default_factory=list)


class DivergenceGuard:
    """Tracks how long the generator loss has exceeded a multiple of its moving median."""

    def __init__(self, factor: float, patience: int, window: int) -> None:
        self.factor = factor
        self.patience = patience
        self.losses: deque[float] = deque(maxlen=window)
        self.streak = 0

    def update(self, loss: float) -> None:
        if self.losses and loss > self.factor * float(np.median(self.losses)):
            self.streak += 1
        else:
            self.streak = 0
        self.losses.append(loss)
        if self.streak >= self.patience:
            raise DistillationDiverged(
                f"Generator loss exceeded {self.factor}x its moving median for {self.streak} iterations"
            )


def gan_distill(
    student: DenoiserModel,
    discriminator: Discriminator,
    teacher: DenoiserModel,
    dataset: TeacherDataset,
    config: DistillConfig,
    validation: TeacherDataset | None = None,
    seed: int = 0,
) -> DistillResult:
    """
    Alternate discriminator and generator updates over minibatches of teacher records.

    The student parameters with the best validation density x coverage are
    restored before returning.
    """
    rng = np.random.default_rng(seed)
    eps, _, s0_all = dataset.arrays()
    x0_all = student.normalize(eps)
    disc_opt = AdamWState.for_parameters(
        discriminator.net.parameters(), config.gan_learning_rate, config.discriminator_weight_decay
    )
    gen_opt = AdamWState.for_parameters(
        student.net.parameters(), config.gan_learning_rate, config.generator_weight_decay
    )
    guard = DivergenceGuard(config.divergence_factor, config.divergence_patience, config.divergence_window)
    held = validation if validation is not None else dataset
    best_params = [p.copy() for p in student.net.parameters()]
    best_score = validation_score(student, held, seed)
    best_iteration = 0
    saturated = 0
    history: list[dict[str, Any]] = []

    for iteration in range(1, config.gan_iterations + 1):
        idx = rng.integers(0, x0_all.shape[0], size=min(config.gan_batch_size, x0_all.shape[0]))
        x0, s0 = x0_all[idx], s0_all[idx]
        fake, _, _ = reconstruct(student, x0, s0, rng)
        disc_loss, disc_saturated = discriminator_step(discriminator, disc_opt, x0, fake, s0)
        losses = generator_step(student, discriminator, teacher, gen_opt, x0, s0, rng, config.distill_weight)
        saturated += disc_saturated + losses.saturated
        guard.update(losses.total)

        if iteration % config.checkpoint_every == 0 or iteration == config.gan_iterations:
            score = validation_score(student, held, seed)
            check, _, _ = reconstruct(student, x0, s0, np.random.default_rng(seed))
            entry = {
                "iteration": iteration,
                "generator_loss": losses.total,
                "discriminator_loss": disc_loss,
                "distill_loss": losses.distill,
                "discriminator_accuracy": discriminator_accuracy(discriminator, x0, check, s0),
                "validation_score": score,
                "saturated": saturated,
            }
            history.append(entry)
            logger.info(
                f"GAN iteration {iteration}: G {losses.total:.4f}, D {disc_loss:.4f}, "
                f"accuracy {entry['discriminator_accuracy']:.3f}, score {score:.4f}"
            )
            if saturated:
                logger.warning(f"Discriminator outputs clamped {saturated} times so far")
            if score > best_score:
                best_score, best_iteration = score, iteration
                best_params = [p.copy() for p in student.net.parameters()]

    student.net.load_parameters(best_params)
    student.history.append({"gan_best_iteration": best_iteration, "gan_best_score": best_score})
    return DistillResult(
        student=student,
        discriminator=discriminator,
        best_iteration=best_iteration,
        best_score=best_score,
        saturated=saturated,
        history=history,
    )
