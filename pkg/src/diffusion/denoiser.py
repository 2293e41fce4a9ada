# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Conditional denoiser: network, schedule, normalisation and ancestral sampling.

The network sees the noisy sample, a sinusoidal embedding of the step and the
encoded (rho, s0) condition. It predicts either the injected noise ("noise") or
the clean sample ("sample"); both give the reverse-step mean as
``mu = a_k * x_k + b_k * net(...)``.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..common.validation import DiffusionConfig
from ..nn import AdamWState, Network, build_residual_net, load_checkpoint, save_checkpoint
from ..nn.checkpoint import array_payload, json_payload
from .conditioning import Conditioning, ConditionEncoder, timestep_embedding
from .schedule import VarianceSchedule, cosine_schedule

logger = logging.getLogger(__name__)


@dataclass
class DenoiserModel:
    net: Network
    schedule: VarianceSchedule
    encoder: ConditionEncoder
    noise_dim: int
    prior_std: float
    data_scale: np.ndarray
    time_embedding_dim: int = 32
    parameterization: str = "noise"
    scenario: str = ""
    history: list[dict[str, Any]] = field(default_factory=list)

    def __post_init__(self) -> None:
        expected = self.noise_dim + self.time_embedding_dim + self.encoder.dim
        if self.net.input_dim != expected or self.net.output_dim != self.noise_dim:
            raise ValueError(
                f"Denoiser network must map {expected} -> {self.noise_dim}, "
                f"got {self.net.input_dim} -> {self.net.output_dim}"
            )
        if self.parameterization not in ("noise", "sample"):
            raise ValueError(f"Unknown parameterization: {self.parameterization}")
        self.data_scale = np.asarray(self.data_scale, dtype=np.float64)

    @property
    def steps(self) -> int:
        return self.schedule.steps

    def normalize(self, eps: np.ndarray) -> np.ndarray:
        return np.asarray(eps, dtype=np.float64) / (self.prior_std * self.data_scale)

    def denormalize(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) * (self.prior_std * self.data_scale)

    def net_input(self, x_k: np.ndarray, k: np.ndarray, rho: np.ndarray, s0: np.ndarray) -> np.ndarray:
        x_k = np.atleast_2d(x_k)
        batch = x_k.shape[0]
        k = np.broadcast_to(np.asarray(k), (batch,))
        rho = np.broadcast_to(np.asarray(rho, dtype=np.float64), (batch,))
        s0 = np.broadcast_to(np.atleast_2d(s0), (batch, self.encoder.dim - 1))
        return np.concatenate(
            [x_k, timestep_embedding(k, self.time_embedding_dim), self.encoder.encode(rho, s0)],
            axis=1,
        )

    def predict(self, x_k: np.ndarray, k: np.ndarray, rho: np.ndarray, s0: np.ndarray) -> np.ndarray:
        return self.net.forward(self.net_input(x_k, k, rho, s0)).astype(np.float64)

    def mean_coefficients(self, k: np.ndarray | int) -> tuple[np.ndarray, np.ndarray]:
        """(a_k, b_k) such that the reverse mean is a_k * x_k + b_k * net."""
        k = np.asarray(k)
        beta = self.schedule.betas[k - 1]
        alpha = 1.0 - beta
        alpha_bars = self.schedule.alpha_bars
        bar_k, bar_prev = alpha_bars[k], alpha_bars[k - 1]
        if self.parameterization == "noise":
            a = 1.0 / np.sqrt(alpha)
            b = -beta / (np.sqrt(1.0 - bar_k) * np.sqrt(alpha))
        else:
            a = np.sqrt(alpha) * (1.0 - bar_prev) / (1.0 - bar_k)
            b = beta * np.sqrt(bar_prev) / (1.0 - bar_k)
        return a, b

    def reverse_mean(self, x_k: np.ndarray, k: int, rho: np.ndarray, s0: np.ndarray) -> np.ndarray:
        a, b = self.mean_coefficients(k)
        return a * np.atleast_2d(x_k) + b * self.predict(x_k, k, rho, s0)

    def reverse_step(
        self, x_k: np.ndarray, k: int, rho: np.ndarray, s0: np.ndarray, rng: np.random.Generator
    ) -> np.ndarray:
        """One ancestral step; the final step (k = 1) adds no noise."""
        self.schedule.check_step(k)
        mean = self.reverse_mean(x_k, k, rho, s0)
        if k == 1:
            return mean
        return mean + np.sqrt(self.schedule.betas[k - 1]) * rng.standard_normal(mean.shape)

    def predict_x0(self, x_k: np.ndarray, k: np.ndarray, rho: np.ndarray, s0: np.ndarray) -> np.ndarray:
        """Clean-sample estimate from a single network call."""
        out = self.predict(x_k, k, rho, s0)
        if self.parameterization == "sample":
            return out
        bar = self.schedule.alpha_bars[np.asarray(k)]
        bar = np.broadcast_to(bar, (out.shape[0],))[:, None]
        return (np.atleast_2d(x_k) - np.sqrt(1.0 - bar) * out) / np.sqrt(bar)

    def sample_batch(self, rho: np.ndarray, s0: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """
        Ancestral sampling from unit noise for a batch of conditions.

        Returns:
            (batch, noise_dim) samples in physical (de-normalised) units.
        """
        s0 = np.atleast_2d(s0)
        x = rng.standard_normal((s0.shape[0], self.noise_dim))
        for k in range(self.steps, 0, -1):
            x = self.reverse_step(x, k, rho, s0, rng)
        return self.denormalize(x)

    def sample(self, cond: Conditioning, rng: np.random.Generator) -> np.ndarray:
        return self.sample_batch(np.array([cond.rho_threshold]), cond.s0[None, :], rng)[0]

    def metadata(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario,
            "parameterization": self.parameterization,
            "noise_dim": self.noise_dim,
            "time_embedding_dim": self.time_embedding_dim,
            "prior_std": self.prior_std,
            "encoder": self.encoder.to_dict(),
            "history": self.history,
        }

    def save(self, path: str | Path, optimizer: AdamWState | None = None) -> Path:
        return save_checkpoint(
            path,
            self.net,
            optimizer,
            sections={
                "META": json_payload(self.metadata()),
                "SCHD": array_payload(self.schedule.betas),
                "SCAL": array_payload(self.data_scale),
            },
        )

    @classmethod
    def load(cls, path: str | Path) -> "DenoiserModel":
        checkpoint = load_checkpoint(path)
        meta = checkpoint.json_section("META")
        model = cls(
            net=checkpoint.network,
            schedule=VarianceSchedule(betas=checkpoint.array_section("SCHD")),
            encoder=ConditionEncoder.from_dict(meta["encoder"]),
            noise_dim=int(meta["noise_dim"]),
            prior_std=float(meta["prior_std"]),
            data_scale=checkpoint.array_section("SCAL"),
            time_embedding_dim=int(meta["time_embedding_dim"]),
            parameterization=meta["parameterization"],
            scenario=meta["scenario"],
            history=list(meta.get("history", [])),
        )
        logger.debug(f"Loaded {model.steps}-step denoiser for scenario {model.scenario!r} from {path}")
        return model


def build_denoiser(
    noise_dim: int,
    encoder: ConditionEncoder,
    config: DiffusionConfig,
    prior_std: float,
    steps: int | None = None,
    parameterization: str | None = None,
    scenario: str = "",
    seed: int = 0,
    dtype: Any = np.float32,
) -> DenoiserModel:
    """Fresh residual-network denoiser with unit data scale."""
    input_dim = noise_dim + config.time_embedding_dim + encoder.dim
    return DenoiserModel(
        net=build_residual_net(input_dim, config.hidden, config.blocks, noise_dim, seed=seed, dtype=dtype),
        schedule=cosine_schedule(steps if steps is not None else config.steps),
        encoder=encoder,
        noise_dim=noise_dim,
        prior_std=prior_std,
        data_scale=np.ones(noise_dim),
        time_embedding_dim=config.time_embedding_dim,
        parameterization=parameterization or config.parameterization,
        scenario=scenario,
    )
