# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
AdamW with decoupled weight decay and bias-corrected moments.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)


class OptimizerError(RuntimeError):
    """Raised on non-finite gradients or mismatched parameter lists."""

    pass


@dataclass
class AdamWState:
    learning_rate: float
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: list[np.ndarray] = field(default_factory=list)
    second_moment: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_parameters(
        cls, params: list[np.ndarray], learning_rate: float, weight_decay: float = 0.0
    ) -> "AdamWState":
        return cls(
            learning_rate=learning_rate,
            weight_decay=weight_decay,
            first_moment=[np.zeros(p.shape, dtype=np.float64) for p in params],
            second_moment=[np.zeros(p.shape, dtype=np.float64) for p in params],
        )


def adamw_step(state: AdamWState, params: list[np.ndarray], grads: list[np.ndarray]) -> AdamWState:
    """
    Apply one AdamW update to ``params`` in place.

    Decay is applied to the parameter before the adaptive step, as
    ``theta <- theta * (1 - lr * wd)``.

    Raises:
        OptimizerError: if shapes disagree or any gradient is non-finite.
    """
    if not (len(params) == len(grads) == len(state.first_moment) == len(state.second_moment)):
        raise OptimizerError(
            f"Parameter/gradient/moment counts differ: {len(params)}, {len(grads)}, {len(state.first_moment)}"
        )
    for index, grad in enumerate(grads):
        if grad.shape != params[index].shape:
            raise OptimizerError(
                f"Gradient {index} has shape {grad.shape}, parameter has {params[index].shape}"
            )
        if not np.all(np.isfinite(grad)):
            raise OptimizerError(f"Non-finite gradient in parameter {index} at step {state.step + 1}")

    state.step += 1
    lr = state.learning_rate
    correction1 = 1.0 - state.beta1**state.step
    correction2 = 1.0 - state.beta2**state.step
    for param, grad, m, v in zip(params, grads, state.first_moment, state.second_moment, strict=True):
        g = grad.astype(np.float64)
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        theta = param.astype(np.float64) * (1.0 - lr * state.weight_decay)
        theta -= lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        param[...] = theta.astype(param.dtype)
    return state
