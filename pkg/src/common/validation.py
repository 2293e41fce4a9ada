# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Configuration validation module for the intersection failure planner.
Provides schema validation and error handling for run configurations.
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Literal

logger = logging.getLogger(__name__)

ScenarioName = Literal["east", "west", "south", "north"]
VALID_SCENARIOS = ["east", "west", "south", "north"]
VALID_LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
VALID_PARAMETERIZATIONS = ["noise", "sample"]
VALID_FEATURE_SPACES = ["trajectory", "epsilon"]


def _check_range(name: str, bounds: tuple[float, float], lo: float = 0.0) -> None:
    if len(bounds) != 2 or bounds[0] > bounds[1] or bounds[0] < lo:
        raise ValueError(f"{name} must be an ordered pair >= {lo}, got: {bounds}")


@dataclass
class WorldConfig:
    """Intersection geometry and initial-state ranges."""

    lane_width: float = 0.04
    branch_length: float = 1.0
    horizon: int = 23
    collision_radius_sum: float | None = None
    ego_distance: tuple[float, float] = (0.35, 0.65)
    ego_speed: tuple[float, float] = (0.35, 0.5)
    intruder_distance: tuple[float, float] = (0.25, 0.45)
    intruder_speed: tuple[float, float] = (0.35, 0.45)

    def __post_init__(self) -> None:
        """Validate geometry after initialization."""
        if self.lane_width <= 0:
            raise ValueError(f"lane_width must be positive, got: {self.lane_width}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be positive, got: {self.horizon}")
        for name in ("ego_distance", "ego_speed", "intruder_distance", "intruder_speed"):
            value = tuple(getattr(self, name))
            _check_range(name, value)  # type: ignore[arg-type]
            setattr(self, name, value)
        max_spawn = max(self.ego_distance[1], self.intruder_distance[1])
        if self.branch_length <= max_spawn + self.lane_width:
            raise ValueError(
                f"branch_length must exceed the largest spawn distance plus a lane width, got: {self.branch_length}"
            )
        if self.collision_radius_sum is None:
            self.collision_radius_sum = self.lane_width
        elif self.collision_radius_sum <= 0:
            raise ValueError(
                f"collision_radius_sum must be positive, got: {self.collision_radius_sum}"
            )


@dataclass
class NoiseConfig:
    """Sensor noise prior. gamma is the covariance coefficient unless gamma_is_precision."""

    gamma: float = 1.0 / 0.15
    gamma_is_precision: bool = False
    inflation: float = 1.0

    def __post_init__(self) -> None:
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got: {self.gamma}")
        if self.inflation <= 0:
            raise ValueError(f"inflation must be positive, got: {self.inflation}")

    @property
    def variance(self) -> float:
        base = 1.0 / self.gamma if self.gamma_is_precision else self.gamma
        return base * self.inflation**2


@dataclass
class IDMConfig:
    """Intelligent Driver Model parameters shared by both vehicles."""

    desired_speed: float = 0.5
    a_max: float = 0.1
    comfortable_decel: float = 0.2
    hard_decel: float = 0.5
    min_gap: float = 0.01
    time_headway: float = 0.6
    ego_delta: float = 4.0
    intruder_delta_range: tuple[float, float] = (3.5, 4.5)

    def __post_init__(self) -> None:
        for name in ("desired_speed", "a_max", "comfortable_decel", "hard_decel"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got: {getattr(self, name)}")
        if self.min_gap < 0 or self.time_headway < 0:
            raise ValueError("min_gap and time_headway must be non-negative")
        self.intruder_delta_range = tuple(self.intruder_delta_range)  # type: ignore[assignment]
        _check_range("intruder_delta_range", self.intruder_delta_range, lo=1e-9)


@dataclass
class DiffusionConfig:
    """Teacher denoiser architecture and CEM-style training rounds."""

    steps: int = 1000
    percentiles: list[float] = field(default_factory=lambda: [100.0, 50.0, 25.0, 10.0, 0.0])
    samples_per_round: int = 2000
    updates_per_round: int = 2000
    batch_size: int = 256
    learning_rate: float = 1e-3
    weight_decay: float = 1e-5
    hidden: int = 256
    blocks: int = 4
    time_embedding_dim: int = 32
    rho_bounds: tuple[float, float] = (0.0, 1.0)
    position_bound: float = 1.0
    velocity_bound: float = 0.6
    relative_s0: bool = False
    parameterization: str = "noise"

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got: {self.steps}")
        if not self.percentiles or any(not 0 <= q <= 100 for q in self.percentiles):
            raise ValueError(f"percentiles must lie in [0, 100], got: {self.percentiles}")
        for name in ("samples_per_round", "updates_per_round", "batch_size", "hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got: {getattr(self, name)}")
        if self.blocks < 0:
            raise ValueError(f"blocks must be >= 0, got: {self.blocks}")
        if self.time_embedding_dim < 2 or self.time_embedding_dim % 2:
            raise ValueError(
                f"time_embedding_dim must be an even number >= 2, got: {self.time_embedding_dim}"
            )
        self.rho_bounds = tuple(self.rho_bounds)  # type: ignore[assignment]
        if self.rho_bounds[1] <= self.rho_bounds[0]:
            raise ValueError(f"rho_bounds must be increasing, got: {self.rho_bounds}")
        if self.parameterization not in VALID_PARAMETERIZATIONS:
            raise ValueError(
                f"Invalid parameterization: {self.parameterization}. Must be one of: {VALID_PARAMETERIZATIONS}"
            )


@dataclass
class DistillConfig:
    """Teacher dataset, supervised pretraining and GAN distillation settings."""

    dataset_size: int = 200000
    student_pretrain_fraction: float = 0.25
    student_parameterization: str = "sample"
    student_beta: float | None = None
    supervised_batch_size: int = 256
    supervised_learning_rate: float = 1e-3
    supervised_weight_decay: float = 1e-5
    supervised_steps: int = 50000
    gan_batch_size: int = 2048
    gan_learning_rate: float = 3e-4
    generator_weight_decay: float = 0.6
    discriminator_weight_decay: float = 0.1
    gan_iterations: int = 5000
    distill_weight: float = 1.0
    checkpoint_every: int = 500
    discriminator_hidden: int = 256
    conditional_discriminator: bool = False
    validation_fraction: float = 0.05
    divergence_factor: float = 10.0
    divergence_patience: int = 100
    divergence_window: int = 200

    def __post_init__(self) -> None:
        for name in (
            "dataset_size",
            "supervised_batch_size",
            "gan_batch_size",
            "checkpoint_every",
            "discriminator_hidden",
            "divergence_patience",
            "divergence_window",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got: {getattr(self, name)}")
        if self.supervised_steps < 0 or self.gan_iterations < 0:
            raise ValueError("supervised_steps and gan_iterations must be non-negative")
        if not 0 < self.student_pretrain_fraction <= 1:
            raise ValueError(
                f"student_pretrain_fraction must lie in (0, 1], got: {self.student_pretrain_fraction}"
            )
        if self.student_beta is not None and not 0 < self.student_beta < 1:
            raise ValueError(f"student_beta must lie in (0, 1), got: {self.student_beta}")
        if not 0 < self.validation_fraction < 1:
            raise ValueError(
                f"validation_fraction must lie in (0, 1), got: {self.validation_fraction}"
            )
        if self.student_parameterization not in VALID_PARAMETERIZATIONS:
            raise ValueError(
                f"Invalid student_parameterization: {self.student_parameterization}. Must be one of: {VALID_PARAMETERIZATIONS}"
            )


@dataclass
class PlannerConfig:
    """Robust planner: failure sets, MILP bounds and policy-phase filtering."""

    total_samples: int = 200
    elite_samples: int = 8
    eta: float = 0.08
    samples_per_filter: int = 10
    cutoff: float = 0.35
    max_forward_velocity: float = 0.5
    max_retrograde_velocity: float = 1e-3
    max_forward_accel_x: float = 0.1
    max_forward_accel_y: float = 1.0
    max_retrograde_accel: float = 0.2
    max_mean_velocity_x: float = 0.4
    max_mean_velocity_y: float = 0.3
    success_distance: float = 0.1
    node_limit: int = 10_000
    kalman_noise_scale: float | None = None
    big_m: float | None = None

    def __post_init__(self) -> None:
        if self.total_samples < 1 or self.elite_samples < 1:
            raise ValueError("total_samples and elite_samples must be >= 1")
        if self.elite_samples > self.total_samples:
            raise ValueError(
                f"elite_samples ({self.elite_samples}) cannot exceed total_samples ({self.total_samples})"
            )
        for name in (
            "eta",
            "max_forward_velocity",
            "max_retrograde_velocity",
            "max_forward_accel_x",
            "max_forward_accel_y",
            "max_retrograde_accel",
            "max_mean_velocity_x",
            "max_mean_velocity_y",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got: {getattr(self, name)}")
        if self.samples_per_filter < 1 or self.node_limit < 1:
            raise ValueError("samples_per_filter and node_limit must be >= 1")
        if self.cutoff < 0 or self.success_distance < 0:
            raise ValueError("cutoff and success_distance must be non-negative")
        if self.kalman_noise_scale is not None and self.kalman_noise_scale <= 0:
            raise ValueError(
                f"kalman_noise_scale must be positive, got: {self.kalman_noise_scale}"
            )


@dataclass
class MetricsConfig:
    """Density/coverage evaluation settings."""

    k: int = 5
    feature_space: str = "trajectory"
    sample_count: int = 1000

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got: {self.k}")
        if self.feature_space not in VALID_FEATURE_SPACES:
            raise ValueError(
                f"Invalid feature_space: {self.feature_space}. Must be one of: {VALID_FEATURE_SPACES}"
            )
        if self.sample_count < 1:
            raise ValueError(f"sample_count must be >= 1, got: {self.sample_count}")


@dataclass
class CampaignConfig:
    """Campaign sizes, seeds and output location."""

    seed: int = 0
    scenarios: list[str] = field(default_factory=lambda: list(VALID_SCENARIOS))
    mc_count: int = 100000
    plan_eval_count: int = 20000
    workers: int = 1
    out: str = "runs/default"
    log_level: str = "INFO"

    def __post_init__(self) -> None:
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got: {self.seed}")
        if not self.scenarios:
            raise ValueError("At least one scenario must be configured")
        for scenario in self.scenarios:
            if scenario not in VALID_SCENARIOS:
                raise ValueError(
                    f"Invalid scenario: {scenario}. Must be one of: {VALID_SCENARIOS}"
                )
        if self.mc_count < 0 or self.plan_eval_count < 0:
            raise ValueError("Campaign counts must be non-negative")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got: {self.workers}")
        if self.log_level.upper() not in VALID_LOG_LEVELS:
            raise ValueError(
                f"Invalid log_level: {self.log_level}. Must be one of: {VALID_LOG_LEVELS}"
            )
        self.log_level = self.log_level.upper()


@dataclass
class RunConfig:
    """Complete, resolved configuration of one run."""

    world: WorldConfig = field(default_factory=WorldConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    idm: IDMConfig = field(default_factory=IDMConfig)
    diffusion: DiffusionConfig = field(default_factory=DiffusionConfig)
    distill: DistillConfig = field(default_factory=DistillConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    campaign: CampaignConfig = field(default_factory=CampaignConfig)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        """Canonical JSON used for echoing and hashing."""
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @property
    def kalman_noise_scale(self) -> float:
        if self.planner.kalman_noise_scale is not None:
            return self.planner.kalman_noise_scale
        return self.noise.variance


class ConfigurationError(Exception):
    """Raised when configuration validation fails."""

    pass


_SECTIONS: dict[str, type] = {f.name: f.type for f in fields(RunConfig)}  # type: ignore[misc]


class ConfigValidator:
    """Validates and loads configuration from a JSON file and environment variables."""

    @staticmethod
    def parse_section(name: str, data: Any) -> Any:
        """Build one validated section dataclass from a JSON object."""
        section_type = _SECTIONS.get(name)
        if section_type is None:
            raise ConfigurationError(
                f"Unknown configuration section: {name}. Must be one of: {sorted(_SECTIONS)}"
            )
        if not isinstance(data, dict):
            raise ConfigurationError(f"Section {name} must be a JSON object")
        known = {f.name for f in fields(section_type)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"Unknown keys in section {name}: {unknown}")
        try:
            return section_type(**data)
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"Invalid configuration in section {name}: {e}") from e

    @classmethod
    def parse_config(cls, text: str) -> RunConfig:
        """Parse and validate a JSON configuration document."""
        try:
            data = json.loads(text) if text.strip() else {}
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Invalid JSON in configuration file: {e}") from e
        if not isinstance(data, dict):
            raise ConfigurationError("Configuration file must contain a JSON object")
        sections = {name: cls.parse_section(name, value) for name, value in data.items()}
        return RunConfig(**sections)

    @staticmethod
    def get_env_bool(key: str, default: bool = False) -> bool:
        """Get boolean value from environment variable."""
        value = os.getenv(key, str(default)).lower()
        return value in ("true", "1", "yes", "on")

    @staticmethod
    def get_env_int(
        key: str, default: int, min_val: int | None = None, max_val: int | None = None
    ) -> int:
        """Get integer value from environment variable with optional bounds checking."""
        try:
            value = int(os.getenv(key, str(default)))
        except ValueError:
            raise ConfigurationError(
                f"Environment variable {key} must be an integer"
            ) from None

        if min_val is not None and value < min_val:
            raise ConfigurationError(
                f"Environment variable {key} must be >= {min_val}, got: {value}"
            )

        if max_val is not None and value > max_val:
            raise ConfigurationError(
                f"Environment variable {key} must be <= {max_val}, got: {value}"
            )

        return value

    @staticmethod
    def get_env_float(key: str, default: float, min_val: float | None = None) -> float:
        """Get float value from environment variable with optional lower bound."""
        try:
            value = float(os.getenv(key, str(default)))
        except ValueError:
            raise ConfigurationError(
                f"Environment variable {key} must be a number"
            ) from None
        if min_val is not None and value < min_val:
            raise ConfigurationError(
                f"Environment variable {key} must be >= {min_val}, got: {value}"
            )
        return value

    @classmethod
    def apply_env_overrides(cls, config: RunConfig) -> RunConfig:
        """Apply CFS_* environment overrides on top of file values."""
        try:
            campaign = config.campaign
            campaign.seed = cls.get_env_int("CFS_SEED", campaign.seed, 0)
            campaign.workers = cls.get_env_int("CFS_WORKERS", campaign.workers, 1)
            campaign.log_level = os.getenv("CFS_LOG_LEVEL", campaign.log_level)
            noise = config.noise
            noise.gamma = cls.get_env_float("CFS_NOISE_GAMMA", noise.gamma, 1e-12)
            noise.inflation = cls.get_env_float(
                "CFS_NOISE_INFLATION", noise.inflation, 1e-12
            )
            noise.gamma_is_precision = cls.get_env_bool(
                "CFS_NOISE_GAMMA_IS_PRECISION", noise.gamma_is_precision
            )
            # re-run section validation on the overridden values
            config.campaign = CampaignConfig(**asdict(campaign))
            config.noise = NoiseConfig(**asdict(noise))
        except ValueError as e:
            raise ConfigurationError(f"Invalid environment override: {e}") from e
        return config

    @classmethod
    def load_config(cls, path: str | Path | None = None) -> RunConfig:
        """Load and validate complete configuration from file and environment."""
        try:
            text = Path(path).read_text(encoding="utf-8") if path else ""
            config = cls.apply_env_overrides(cls.parse_config(text))
            logger.info(
                f"Configuration loaded successfully: scenarios {config.campaign.scenarios}, seed {config.campaign.seed}"
            )
            return config
        except Exception as e:
            if isinstance(e, ConfigurationError):
                raise
            else:
                raise ConfigurationError(f"Failed to load configuration: {e}") from e


def load_validated_config(path: str | Path | None = None) -> RunConfig:
    """Load and validate configuration, with user-friendly error messages."""
    try:
        return ConfigValidator.load_config(path)
    except ConfigurationError as e:
        logger.error(f"Configuration error: {e}")
        logger.error("Please check your configuration file and .env overrides")
        raise
    except Exception as e:
        logger.error(f"Unexpected error loading configuration: {e}")
        raise ConfigurationError(
            "Failed to load configuration due to unexpected error"
        ) from e


def config_from_dict(data: dict[str, Any]) -> RunConfig:
    """Rebuild a RunConfig from its dict form (e.g. an echoed resolved config)."""
    return ConfigValidator.parse_config(json.dumps(data))
