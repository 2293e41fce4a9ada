# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Small numpy function-approximator stack: dense/residual networks, AdamW, checkpoints.
"""

from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .network import (
    Dense,
    Network,
    NetworkShapeError,
    Residual,
    build_mlp,
    build_residual_net,
    parameter_digest,
)
from .optim import AdamWState, OptimizerError, adamw_step

__all__ = [
    "AdamWState",
    "Checkpoint",
    "CheckpointError",
    "Dense",
    "Network",
    "NetworkShapeError",
    "OptimizerError",
    "Residual",
    "adamw_step",
    "build_mlp",
    "build_residual_net",
    "load_checkpoint",
    "parameter_digest",
    "save_checkpoint",
]
