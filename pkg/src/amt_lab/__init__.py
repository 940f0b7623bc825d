"""Planar landing dynamics for an aerial-terrestrial vehicle.

Analytic four-phase impact model, landing-angle optimization, a penalty
contact oracle and a three-stage mission simulator.
"""
from .errors import AMTError
from .kinematics import (
    DEFAULT_CLOSURE,
    FinalClosure,
    ImpactClosure,
    InitialClosure,
    compute_impulses,
    optimize_landing_angle,
    simulate_landing,
    simultaneous_landing,
    solve_entrance_for_exit,
    solve_final_impact,
    solve_free_fall,
    solve_initial_impact,
    solve_roll,
    sweep_landing_angle,
)
from .model import (
    REFERENCE_SCENARIO,
    ControlLimits,
    ImpulseReport,
    LandingScenario,
    PhaseOutcome,
    PlanarState,
    VehicleParams,
    com_height_at_contact,
    contact_geometry,
    default_vehicle,
    load_vehicle_params,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
