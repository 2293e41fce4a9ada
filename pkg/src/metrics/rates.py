# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Failure and delay rates over simulated outcomes and planner rollouts.
"""

from collections.abc import Iterable, Sequence

import numpy as np

from ..sim import SimOutcome


def failure_rate(outcomes: Sequence[SimOutcome]) -> float:
    """Fraction of collided outcomes."""
    if len(outcomes) == 0:
        raise ValueError("failure_rate needs at least one outcome")
    return sum(bool(o.collided) for o in outcomes) / len(outcomes)


def delay_rate(flags: Iterable[bool]) -> float:
    """Fraction of rollouts that did not reach the destination in time."""
    values = np.fromiter((bool(f) for f in flags), dtype=bool)
    if values.size == 0:
        raise ValueError("delay_rate needs at least one rollout")
    return float(values.mean())
