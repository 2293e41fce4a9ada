# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Robust planning against sampled failures.
"""

from .failures import FailureSampleSet, generate_failure_set, select_lowest
from .kalman import BeliefError, BeliefFilter, check_psd, kalman_update
from .milp_plan import PlanMilp, PlanSolution, audit_plan, build_plan_milp, heuristic_incumbent, solve_plan
from .policy import PolicyDecision, plausible_states, policy_phase_action
from .regions import PlanRegions, plan_regions, terminal_box
from .robust import (
    ControllerOutcome,
    RobustPlannerPolicy,
    RolloutStep,
    run_idm_baseline,
    run_robust_planner,
    write_rollout_log,
)

__all__ = [
    "BeliefError",
    "BeliefFilter",
    "ControllerOutcome",
    "FailureSampleSet",
    "PlanMilp",
    "PlanRegions",
    "PlanSolution",
    "PolicyDecision",
    "RobustPlannerPolicy",
    "RolloutStep",
    "audit_plan",
    "build_plan_milp",
    "check_psd",
    "generate_failure_set",
    "heuristic_incumbent",
    "kalman_update",
    "plan_regions",
    "plausible_states",
    "policy_phase_action",
    "run_idm_baseline",
    "run_robust_planner",
    "select_lowest",
    "solve_plan",
    "terminal_box",
    "write_rollout_log",
]
