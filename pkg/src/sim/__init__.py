# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Four-way intersection simulator: geometry, IDM vehicles, sensor noise and robustness.
"""

from .geometry import (
    Branch,
    Conflict,
    GeometryError,
    Route,
    WorldGeometry,
    build_world,
    distance_past_intersection,
    distance_to_intersection,
)
from .idm import IDMParams, idm_acceleration
from .noise import NoisePrior, rng_for
from .outcomes import SimOutcome, read_outcomes, write_outcomes, write_outcomes_csv
from .scenario import (
    EGO_SPAWN,
    InitialState,
    Scenario,
    SimulationError,
    VehicleState,
    initial_state_from_vector,
    sample_initial_state,
    sample_scenario,
    state_vector,
)
from .world import IdmEgoPolicy, Simulator, advance_vehicle, far_intruder, observe, robustness

__all__ = [
    "EGO_SPAWN",
    "Branch",
    "Conflict",
    "GeometryError",
    "IDMParams",
    "IdmEgoPolicy",
    "InitialState",
    "NoisePrior",
    "Route",
    "Scenario",
    "SimOutcome",
    "SimulationError",
    "Simulator",
    "VehicleState",
    "WorldGeometry",
    "advance_vehicle",
    "build_world",
    "distance_past_intersection",
    "distance_to_intersection",
    "idm_acceleration",
    "far_intruder",
    "initial_state_from_vector",
    "observe",
    "read_outcomes",
    "rng_for",
    "robustness",
    "sample_initial_state",
    "sample_scenario",
    "state_vector",
    "write_outcomes",
    "write_outcomes_csv",
]
