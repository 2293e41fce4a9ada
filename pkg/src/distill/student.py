# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
One-step student: construction, sampling and supervised pretraining.
"""

import logging

import numpy as np

from ..common.validation import DiffusionConfig, DistillConfig
from ..diffusion import DenoiserModel, Evaluator, VarianceSchedule, cosine_schedule, train_teacher
from ..nn import AdamWState, adamw_step
from .dataset import TeacherDataset

logger = logging.getLogger(__name__)


class DistillationDiverged(RuntimeError):
    """Raised on non-finite losses or a persistently exploding generator loss."""

    pass


def student_beta(config: DistillConfig) -> float:
    """beta-hat: the configured value, else the single beta of a one-step cosine schedule."""
    if config.student_beta is not None:
        return float(config.student_beta)
    return float(cosine_schedule(1).betas[0])


def pretrain_student(
    evaluator: Evaluator,
    diffusion: DiffusionConfig,
    distill: DistillConfig,
    teacher: DenoiserModel,
    seed: int = 0,
) -> DenoiserModel:
    """Run the teacher's own round-based training for a one-step model at a reduced budget."""
    logger.info(
        f"Pretraining one-step student for {teacher.scenario!r} "
        f"at {distill.student_pretrain_fraction:.0%} of the teacher budget"
    )
    return train_teacher(
        evaluator,
        diffusion,
        seed=seed,
        scenario=teacher.scenario,
        parameterization=distill.student_parameterization,
        encoder=teacher.encoder,
        budget_fraction=distill.student_pretrain_fraction,
        schedule=VarianceSchedule(betas=np.array([student_beta(distill)])),
        data_scale=teacher.data_scale,
    )


def student_sample(
    student: DenoiserModel, rho: np.ndarray, s0: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Unit noise followed by one reverse step, de-normalised. Shape (batch, noise_dim)."""
    if student.steps != 1:
        raise ValueError(f"A student has exactly one step, got {student.steps}")
    return student.sample_batch(rho, s0, rng)


def reconstruct(
    student: DenoiserModel, x0: np.ndarray, s0: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, list, np.ndarray]:
    """
    Diffuse normalised samples with the student's forward process and reconstruct them.

    Returns:
        (reconstruction mu, network caches, network output coefficient b)
    """
    beta = student.schedule.betas[0]
    noised = np.sqrt(1.0 - beta) * x0 + np.sqrt(beta) * rng.standard_normal(x0.shape)
    a, b = student.mean_coefficients(1)
    rho = np.zeros(x0.shape[0])
    out, caches = student.net.forward_with_cache(student.net_input(noised, 1, rho, s0))
    return a * noised + b * out.astype(np.float64), caches, b


def supervised_step(
    student: DenoiserModel,
    optimizer: AdamWState,
    x0: np.ndarray,
    s0: np.ndarray,
    rng: np.random.Generator,
) -> float:
    recon, caches, b = reconstruct(student, x0, s0, rng)
    residual = recon - x0
    loss = float(np.mean(residual**2))
    if not np.isfinite(loss):
        raise DistillationDiverged(f"Supervised pretraining loss became non-finite ({loss})")
    _, grads = student.net.backward(caches, b * 2.0 * residual / residual.size)
    adamw_step(optimizer, student.net.parameters(), grads)
    return loss


def supervised_loss(student: DenoiserModel, x0: np.ndarray, s0: np.ndarray, seed: int = 0) -> float:
    recon, _, _ = reconstruct(student, x0, s0, np.random.default_rng(seed))
    return float(np.mean((recon - x0) ** 2))


def supervised_pretrain(
    student: DenoiserModel,
    dataset: TeacherDataset,
    config: DistillConfig,
    seed: int = 0,
    validation: TeacherDataset | None = None,
) -> list[float]:
    """
    Reconstruct teacher samples from the student's forward-diffused copies (MSE).

    Returns:
        Validation losses recorded every ``checkpoint_every`` steps (initial value first).
    """
    rng = np.random.default_rng(seed)
    eps, _, s0 = dataset.arrays()
    x0 = student.normalize(eps)
    held = validation if validation is not None and len(validation) else dataset
    v_eps, _, v_s0 = held.arrays()
    v_x0 = student.normalize(v_eps)

    optimizer = AdamWState.for_parameters(
        student.net.parameters(), config.supervised_learning_rate, config.supervised_weight_decay
    )
    history = [supervised_loss(student, v_x0, v_s0, seed)]
    for step in range(1, config.supervised_steps + 1):
        idx = rng.integers(0, x0.shape[0], size=min(config.supervised_batch_size, x0.shape[0]))
        loss = supervised_step(student, optimizer, x0[idx], s0[idx], rng)
        if step % config.checkpoint_every == 0 or step == config.supervised_steps:
            history.append(supervised_loss(student, v_x0, v_s0, seed))
            logger.debug(f"Supervised step {step}: batch loss {loss:.5f}, validation {history[-1]:.5f}")
    logger.info(f"Supervised pretraining finished: validation MSE {history[0]:.4f} -> {history[-1]:.4f}")
    return history
