# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Property-based testing using Hypothesis to find edge cases in the numeric core.

These tests use randomized inputs to discover corner cases that manual tests might miss.
"""

import json
import math
import unittest

import numpy as np
import pytest

try:
    from hypothesis import assume, given, settings
    from hypothesis import strategies as st

    hypothesis_available = True
except ImportError:
    hypothesis_available = False

    def given(*args, **kwargs):
        def decorator(func):
            return func

        return decorator

    def settings(*args, **kwargs):
        def decorator(func):
            return func

        return decorator

    class st:
        @staticmethod
        def floats(*args, **kwargs):
            return None

        @staticmethod
        def integers(*args, **kwargs):
            return None

        @staticmethod
        def text(*args, **kwargs):
            return None


from src.common.validation import ConfigurationError, ConfigValidator, IDMConfig
from src.metrics import coverage, density, two_proportion_z
from src.planner.kalman import BeliefFilter, check_psd, kalman_update
from src.sim.idm import IDMParams, idm_acceleration

PARAMS = IDMParams.from_config(IDMConfig(), delta=4.0)
speeds = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
gaps = st.floats(min_value=1e-4, max_value=2.0, allow_nan=False)
closing = st.floats(min_value=-1.0, max_value=1.0, allow_nan=False)


@pytest.mark.property
@unittest.skipUnless(hypothesis_available, "Hypothesis library not available")
class TestIdmProperties(unittest.TestCase):
    @given(speeds, gaps, closing)
    def test_acceleration_is_bounded(self, v, gap, dv):
        accel = idm_acceleration(v, gap, dv, PARAMS)
        self.assertGreaterEqual(accel, -PARAMS.hard_decel)
        self.assertLessEqual(accel, PARAMS.a_max)

    @given(speeds, gaps, gaps, closing)
    def test_larger_gap_never_brakes_harder(self, v, gap_a, gap_b, dv):
        near, far = sorted((gap_a, gap_b))
        self.assertLessEqual(idm_acceleration(v, near, dv, PARAMS), idm_acceleration(v, far, dv, PARAMS) + 1e-12)

    @given(speeds, gaps, closing, closing)
    def test_faster_closing_never_accelerates_more(self, v, gap, dv_a, dv_b):
        slow, fast = sorted((dv_a, dv_b))
        self.assertGreaterEqual(idm_acceleration(v, gap, slow, PARAMS) + 1e-12, idm_acceleration(v, gap, fast, PARAMS))

    @given(speeds, closing)
    def test_free_road_bounds_interaction(self, v, dv):
        self.assertGreaterEqual(idm_acceleration(v, math.inf, dv, PARAMS) + 1e-12, idm_acceleration(v, 0.5, dv, PARAMS))


@pytest.mark.property
@unittest.skipUnless(hypothesis_available, "Hypothesis library not available")
class TestStatisticsProperties(unittest.TestCase):
    @given(
        st.integers(min_value=1, max_value=5000),
        st.integers(min_value=1, max_value=5000),
        st.integers(min_value=0, max_value=5000),
        st.integers(min_value=0, max_value=5000),
    )
    def test_z_test_is_antisymmetric(self, n1, n2, s1, s2):
        assume(s1 <= n1 and s2 <= n2)
        forward = two_proportion_z(s1, n1, s2, n2)
        backward = two_proportion_z(s2, n2, s1, n1)
        self.assertAlmostEqual(forward.z, -backward.z, places=9)
        self.assertEqual(forward.degenerate, backward.degenerate)
        self.assertTrue(0.0 <= forward.p_value <= 1.0)
        self.assertAlmostEqual(forward.p_value + backward.p_value, 1.0, places=9)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1), st.integers(min_value=1, max_value=4))
    def test_metrics_ignore_sample_order(self, seed, k):
        rng = np.random.default_rng(seed)
        real = rng.normal(size=(20, 3))
        fake = rng.normal(loc=0.2, size=(15, 3))
        shuffled_real = real[rng.permutation(len(real))]
        shuffled_fake = fake[rng.permutation(len(fake))]
        self.assertAlmostEqual(density(real, fake, k), density(shuffled_real, shuffled_fake, k), places=12)
        self.assertAlmostEqual(coverage(real, fake, k), coverage(shuffled_real, shuffled_fake, k), places=12)
        self.assertTrue(0.0 <= coverage(real, fake, k) <= 1.0)
        self.assertLessEqual(density(real, fake, k), len(real) / k)


@pytest.mark.property
@unittest.skipUnless(hypothesis_available, "Hypothesis library not available")
class TestBeliefProperties(unittest.TestCase):
    @settings(max_examples=50, deadline=None)
    @given(
        st.integers(min_value=0, max_value=2**32 - 1),
        st.floats(min_value=1e-3, max_value=10.0, allow_nan=False),
        st.integers(min_value=1, max_value=30),
    )
    def test_updates_keep_covariance_psd(self, seed, gamma, steps):
        rng = np.random.default_rng(seed)
        factor = rng.normal(size=(4, 4))
        belief = BeliefFilter(rng.normal(size=4), factor @ factor.T)
        for _ in range(steps):
            belief = kalman_update(belief, rng.normal(scale=2.0, size=4), gamma)
            check_psd(belief.covariance)
            np.testing.assert_allclose(belief.covariance, belief.covariance.T)
        np.testing.assert_allclose(belief.covariance[2:, 2:], gamma * np.eye(2))


@pytest.mark.property
@unittest.skipUnless(hypothesis_available, "Hypothesis library not available")
class TestConfigProperties(unittest.TestCase):
    @given(st.text(min_size=1, max_size=20))
    def test_unknown_sections_are_rejected(self, name):
        assume(name not in {"world", "noise", "idm", "diffusion", "distill", "planner", "metrics", "campaign"})
        with self.assertRaises(ConfigurationError):
            ConfigValidator.parse_config(json.dumps({name: {}}))

    @given(st.integers(min_value=-1000, max_value=-1))
    def test_negative_seeds_are_rejected(self, seed):
        with self.assertRaises(ConfigurationError):
            ConfigValidator.parse_config(json.dumps({"campaign": {"seed": seed}}))


if __name__ == "__main__":
    unittest.main()
