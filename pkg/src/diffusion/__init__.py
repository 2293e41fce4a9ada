# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Conditional denoising diffusion over observation-error sequences.
"""

from .conditioning import Conditioning, ConditionEncoder, timestep_embedding
from .denoiser import DenoiserModel, build_denoiser
from .schedule import ScheduleError, VarianceSchedule, cosine_schedule, forward_diffuse
from .training import (
    Evaluator,
    FailureRegimeUnreachable,
    ScenarioCase,
    ScenarioEvaluator,
    scenario_evaluator,
    train_teacher,
)

__all__ = [
    "ConditionEncoder",
    "Conditioning",
    "DenoiserModel",
    "Evaluator",
    "FailureRegimeUnreachable",
    "ScenarioCase",
    "ScenarioEvaluator",
    "ScheduleError",
    "VarianceSchedule",
    "build_denoiser",
    "cosine_schedule",
    "forward_diffuse",
    "scenario_evaluator",
    "timestep_embedding",
    "train_teacher",
]
