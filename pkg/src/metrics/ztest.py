# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
One-tailed two-proportion z-test (pooled variance).
"""

import logging
import math
from dataclasses import dataclass

from scipy.stats import norm

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ZTestResult:
    z: float
    p_value: float
    degenerate: bool = False

    def significant(self, alpha: float = 0.05) -> bool:
        return not self.degenerate and self.p_value < alpha


def two_proportion_z(successes_1: int, n_1: int, successes_2: int, n_2: int) -> ZTestResult:
    """
    Test H1: proportion 1 > proportion 2.

    Returns:
        ZTestResult with the pooled z statistic and the upper-tail p-value. A
        zero pooled variance (no successes or all successes) yields z = 0,
        p = 0.5 and ``degenerate=True``.

    Raises:
        ValueError: on non-positive sample sizes or counts outside [0, n].
    """
    if n_1 <= 0 or n_2 <= 0:
        raise ValueError(f"Sample sizes must be positive, got: {n_1}, {n_2}")
    if not (0 <= successes_1 <= n_1 and 0 <= successes_2 <= n_2):
        raise ValueError(f"Counts must lie in [0, n], got: {successes_1}/{n_1}, {successes_2}/{n_2}")
    pooled = (successes_1 + successes_2) / (n_1 + n_2)
    variance = pooled * (1.0 - pooled) * (1.0 / n_1 + 1.0 / n_2)
    if variance <= 0.0:
        logger.warning("Two-proportion z-test with zero pooled variance; reporting p = 0.5")
        return ZTestResult(z=0.0, p_value=0.5, degenerate=True)
    z = (successes_1 / n_1 - successes_2 / n_2) / math.sqrt(variance)
    return ZTestResult(z=z, p_value=float(norm.sf(z)))
