import math
from dataclasses import replace

import numpy as np
import pytest

from amt_lab import (
    LandingScenario,
    PhaseOutcome,
    compute_impulses,
    contact_geometry,
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
from amt_lab.errors import (
    InfeasibleScenarioError,
    NoSolutionError,
    ParameterError,
    PhaseError,
    WrongPhaseError,
)
from amt_lab.kinematics import (
    DEFAULT_CLOSURE,
    ImpactClosure,
    initial_constraint_residual,
    initial_momentum_residual,
    kinetic_energy,
    roll_energy_residual,
)

from conftest import ALL_CLOSURES, NI_MC, NI_PF, SP_MC, SP_PF, deg


def impact_by_linear_solve(params, v1, theta, closure):
    """Independent 3x3 solve of (AM about contact, hub vy = 0, closure row)."""
    g = contact_geometry(params, theta)
    d2, db = np.array(g.d2), np.array(g.d_back)
    m, inertia = params.mass_total, params.inertia_pitch
    A = np.array([
        [-m * d2[1], m * d2[0], inertia],
        [0.0, 1.0, -db[0]],
        [1.0, 0.0, 0.0] if closure is NI_MC.initial else [1.0, 0.0, db[1]],
    ])
    b = np.array([m * (d2[0] * v1[1] - d2[1] * v1[0]), 0.0, v1[0] if closure is NI_MC.initial else 0.0])
    return np.linalg.solve(A, b)


# ---------------------------------------------------------------------------
# free fall


def test_free_fall_direct_formula(vehicle):
    theta = deg(20)
    hc = vehicle.wheel_radius + vehicle.half_wheelbase * math.sin(theta)
    sc = LandingScenario(1.3, hc + 0.45, theta)
    p1 = solve_free_fall(vehicle, sc)
    assert p1.com_velocity[0] == 1.3
    assert p1.com_velocity[1] == pytest.approx(-2.9713633, abs=1e-7)
    assert p1.pitch_rate == 0.0
    assert p1.pitch == theta
    assert p1.com_height == pytest.approx(hc, abs=1e-15)


def test_free_fall_zero_drop_limit(vehicle):
    hc = vehicle.wheel_radius
    p1 = solve_free_fall(vehicle, LandingScenario(0.0, hc + 1e-12, 0.0))
    assert abs(p1.com_velocity[1]) < 1e-5


def test_free_fall_reference(vehicle, reference):
    # default profile: r = 0.14, L/2 = 0.1425
    dh = 0.65 - (0.14 + 0.1425 * 0.34202014)
    p1 = solve_free_fall(vehicle, reference)
    assert p1.com_velocity == pytest.approx((1.3, -math.sqrt(2 * 9.81 * dh)), abs=1e-7)


def test_free_fall_no_drop_raises(vehicle):
    with pytest.raises(InfeasibleScenarioError):
        solve_free_fall(vehicle, LandingScenario(1.0, 0.14, 0.0))


# ---------------------------------------------------------------------------
# initial impact


@pytest.mark.parametrize("closure", [NI_MC, SP_MC])
def test_initial_impact_rest_stays_rest(vehicle, closure):
    p1 = PhaseOutcome(1, (0.0, 0.0), 0.0, 0.2, 0.0, deg(20))
    p2 = solve_initial_impact(vehicle, p1, deg(20), closure)
    assert p2.com_velocity == (0.0, 0.0)
    assert p2.pitch_rate == 0.0


def test_initial_impact_zero_wheelbase(vehicle):
    p = replace(vehicle, wheelbase=0.0)
    p1 = PhaseOutcome(1, (1.1, -2.5), 0.0, 0.14, 0.0, deg(20))
    p2 = solve_initial_impact(p, p1, deg(20), NI_MC)
    assert p2.com_velocity == (1.1, 0.0)
    assert p2.pitch_rate == 0.0


@pytest.mark.parametrize("closure", [NI_MC, SP_MC])
@pytest.mark.parametrize("theta_deg", [5.0, 12.0, 20.0, 29.0])
def test_initial_impact_matches_linear_solve(vehicle, reference, closure, theta_deg):
    sc = reference.with_angle(deg(theta_deg))
    p1 = solve_free_fall(vehicle, sc)
    p2 = solve_initial_impact(vehicle, p1, sc.landing_angle, closure)
    ref = impact_by_linear_solve(vehicle, p1.com_velocity, sc.landing_angle, closure.initial)
    assert np.allclose([*p2.com_velocity, p2.pitch_rate], ref, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("closure", ALL_CLOSURES)
def test_initial_impact_reference_residuals(vehicle, reference, closure):
    p1 = solve_free_fall(vehicle, reference)
    p2 = solve_initial_impact(vehicle, p1, reference.landing_angle, closure)
    assert initial_momentum_residual(vehicle, p1, p2, reference.landing_angle) < 1e-12
    assert initial_constraint_residual(vehicle, p2, reference.landing_angle) < 1e-12
    assert p2.pitch_rate < 0


def test_initial_impact_wheel_spin_from_hub(vehicle, reference):
    p1 = solve_free_fall(vehicle, reference)
    ni = solve_initial_impact(vehicle, p1, reference.landing_angle, NI_MC)
    db = contact_geometry(vehicle, reference.landing_angle).d_back
    hub_vx = ni.com_velocity[0] + ni.pitch_rate * db[1]
    assert ni.wheel_spin == pytest.approx(hub_vx / vehicle.wheel_radius, rel=1e-14)
    sp = solve_initial_impact(vehicle, p1, reference.landing_angle, SP_MC)
    assert sp.wheel_spin == pytest.approx(0.0, abs=1e-12)


def test_initial_impact_needs_positive_angle(vehicle):
    p1 = PhaseOutcome(1, (1.0, -2.0), 0.0, 0.14)
    with pytest.raises(WrongPhaseError):
        solve_initial_impact(vehicle, p1, 0.0)


# ---------------------------------------------------------------------------
# roll


def test_roll_zero_arc_returns_input(vehicle):
    p2 = PhaseOutcome(2, (0.7, -0.3), -1.5, 0.14)
    p3 = solve_roll(vehicle, p2, 0.0)
    assert p3.com_velocity == p2.com_velocity
    assert p3.pitch_rate == p2.pitch_rate


def test_roll_from_rest(vehicle):
    theta = deg(20)
    p2 = PhaseOutcome(2, (0.0, 0.0), 0.0, 0.2, 0.0, theta)
    p3 = solve_roll(vehicle, p2, theta)
    half, k2 = 0.1425, 0.125 / 4.2
    h2 = half * 0.34202014
    w3 = -math.sqrt(2 * 9.81 * h2 / (half ** 2 + k2))
    assert p3.pitch_rate == pytest.approx(w3, rel=1e-7)
    assert p3.com_velocity[0] == 0.0
    assert p3.com_velocity[1] == pytest.approx(w3 * half, rel=1e-7)
    # energy: 1/2 I w^2 + 1/2 m vy^2 = m g h2
    m, inertia = 4.2, 0.125
    e = 0.5 * inertia * p3.pitch_rate ** 2 + 0.5 * m * p3.com_velocity[1] ** 2
    assert e == pytest.approx(m * 9.81 * vehicle.half_wheelbase * math.sin(theta), rel=1e-12)


@pytest.mark.parametrize("closure", ALL_CLOSURES)
def test_roll_reference_energy(vehicle, reference, closure):
    chain = simulate_landing(vehicle, reference, closure)
    p1, p2, p3, _ = chain.outcomes
    assert roll_energy_residual(vehicle, p2, p3, reference.landing_angle) < 1e-10
    assert p3.pitch_rate < 0
    assert p3.com_velocity[0] == p2.com_velocity[0]
    assert p3.com_velocity[1] == p3.pitch_rate * vehicle.half_wheelbase


def test_roll_rejects_nose_up(vehicle):
    with pytest.raises(WrongPhaseError):
        solve_roll(vehicle, PhaseOutcome(2, (1.0, 0.0), 0.5, 0.2), deg(10))


# ---------------------------------------------------------------------------
# final impact


@pytest.mark.parametrize("closure", ALL_CLOSURES)
def test_final_impact_rolling_identity(vehicle, closure):
    p3 = PhaseOutcome(3, (0.8, 0.0), 0.0, 0.14)
    p4 = solve_final_impact(vehicle, p3, closure)
    assert p4.com_velocity == pytest.approx((0.8, 0.0), abs=1e-15)
    assert p4.pitch_rate == 0.0
    rest = solve_final_impact(vehicle, PhaseOutcome(3, (0.0, 0.0), 0.0, 0.14), closure)
    assert rest.com_velocity == (0.0, 0.0)


def test_final_impact_paper_faithful_linear_relation(vehicle, reference):
    chain = simulate_landing(vehicle, reference, NI_PF)
    p3, p4 = chain.outcomes[2], chain.outcomes[3]
    r, half, k2 = 0.14, 0.1425, 0.125 / 4.2
    # d4 = (-half, r); d4 x v3 = -half*v3y - r*v3x; -r*v4x = d4 x v3 + k2*w3
    v3x, v3y = p3.com_velocity
    v4x = -((-half * v3y - r * v3x) + k2 * p3.pitch_rate) / r
    assert p4.com_velocity[0] == pytest.approx(v4x, rel=1e-13)
    assert p4.com_velocity[1] == 0.0 and p4.pitch_rate == 0.0
    assert p4.wheel_spin == pytest.approx(v4x / r, rel=1e-13)


def test_final_impact_momentum_conserving_keeps_vx(vehicle, reference):
    chain = simulate_landing(vehicle, reference, SP_MC)
    assert chain.outcomes[3].com_velocity[0] == chain.outcomes[2].com_velocity[0]


def test_final_impact_needs_level(vehicle):
    with pytest.raises(WrongPhaseError):
        solve_final_impact(vehicle, PhaseOutcome(3, (1.0, -1.0), -2.0, 0.14, 0.0, 1e-6))


# ---------------------------------------------------------------------------
# impulses and pipeline


def test_equal_velocities_give_zero_impulse(vehicle):
    o = PhaseOutcome(1, (1.0, -1.0), 0.0, 0.2)
    chain = [o, replace(o, phase_index=2), replace(o, phase_index=3), replace(o, phase_index=4)]
    rep = compute_impulses(vehicle, chain)
    assert rep.impulse_initial == (0.0, 0.0)
    assert rep.impulse_max == 0.0


def test_impulses_recomputed_bit_exact(vehicle, reference):
    chain = simulate_landing(vehicle, reference)
    v = [o.com_velocity for o in chain.outcomes]
    m = vehicle.mass_total
    i2 = (m * (v[1][0] - v[0][0]), m * (v[1][1] - v[0][1]))
    i4 = (m * (v[3][0] - v[2][0]), m * (v[3][1] - v[2][1]))
    assert chain.impulses.impulse_initial == i2
    assert chain.impulses.impulse_final == i4
    assert chain.impulses.impulse_max == max(math.hypot(*i2), math.hypot(*i4))
    assert chain.impulses.exit_velocity == chain.outcomes[3].com_velocity


def test_pipeline_shape_and_determinism(vehicle, reference):
    a = simulate_landing(vehicle, reference)
    b = simulate_landing(vehicle, reference)
    assert a == b
    assert [o.phase_index for o in a.outcomes] == [1, 2, 3, 4]


def test_quasi_static_placement(vehicle):
    theta = deg(20)
    hc = vehicle.wheel_radius + vehicle.half_wheelbase * math.sin(theta)
    chain = simulate_landing(vehicle, LandingScenario(0.0, hc + 1e-12, theta), NI_MC)
    assert chain.impulses.initial_norm < 1e-4
    assert abs(chain.impulses.exit_velocity[0]) < 1e-4
    # the chassis still rotates down onto the front wheel, so I4 is not small
    assert chain.impulses.final_norm > 1.0


def test_reference_exit_speed_reported(vehicle, reference):
    chain = simulate_landing(vehicle, reference)
    vx = chain.impulses.exit_velocity[0]
    assert 0.0 < vx < reference.entrance_speed_x
    assert chain.feasibility.exit_speed_ok


def test_pitch_limit_feasibility(vehicle, reference):
    assert simulate_landing(vehicle, reference.with_angle(deg(24))).feasibility.ok
    f = simulate_landing(vehicle, reference.with_angle(deg(26))).feasibility
    assert not f.pitch_ok and not f.ok


def test_phase_error_carries_index(vehicle):
    with pytest.raises(PhaseError) as err:
        simulate_landing(vehicle, LandingScenario(1.0, 0.5, 0.0))
    assert err.value.phase_index == 2
    assert err.value.to_dict()["phase"] == 2


def test_simultaneous_landing_splits_evenly(vehicle):
    sc = LandingScenario(0.0, 0.5, 0.0)
    vy = -math.sqrt(2 * 9.81 * (0.5 - 0.14))
    rep = simultaneous_landing(vehicle, sc, NI_MC)
    assert rep.impulse_initial == rep.impulse_final
    assert rep.impulse_initial[1] == pytest.approx(-0.5 * 4.2 * vy, rel=1e-14)
    moving = simultaneous_landing(vehicle, LandingScenario(1.0, 0.5, 0.0), NI_MC)
    assert moving.exit_velocity == (1.0, 0.0)
    stopped = simultaneous_landing(vehicle, LandingScenario(1.0, 0.5, 0.0), SP_MC)
    assert stopped.exit_velocity == (0.0, 0.0)
    assert stopped.impulse_initial[0] == pytest.approx(-2.1)


# ---------------------------------------------------------------------------
# sweep and optimizer


def test_sweep_two_steps_are_endpoints(vehicle, reference):
    recs = sweep_landing_angle(vehicle, reference, deg(5), deg(30), 2)
    assert [r.landing_angle for r in recs] == [deg(5), deg(30)]


def test_sweep_grid_increasing_and_threads_agree(vehicle, reference):
    a = sweep_landing_angle(vehicle, reference, deg(5), deg(30), 41)
    b = sweep_landing_angle(vehicle, reference, deg(5), deg(30), 41, workers=4)
    assert a == b
    t = [r.landing_angle for r in a]
    assert all(y > x for x, y in zip(t, t[1:]))


@pytest.mark.parametrize("lo,hi,steps", [(30, 5, 10), (0, 20, 10), (5, 95, 10), (5, 30, 1)])
def test_sweep_rejects_bad_input(vehicle, reference, lo, hi, steps):
    with pytest.raises(ParameterError):
        sweep_landing_angle(vehicle, reference, deg(lo), deg(hi), steps)


def test_optimizer_degenerate_interval(vehicle, reference):
    assert optimize_landing_angle(vehicle, reference, deg(17), deg(17)).landing_angle == deg(17)


def test_optimizer_grid_dominant(vehicle, reference):
    opt = optimize_landing_angle(vehicle, reference, deg(5), deg(30))
    grid = sweep_landing_angle(vehicle, reference, deg(5), deg(30), 1000)
    assert min(r.report.impulse_max for r in grid) >= opt.report.impulse_max - 1e-9
    assert deg(12) <= opt.landing_angle <= deg(28)


def test_optimizer_tie_prefers_smaller_angle(vehicle, reference):
    # normal-impulse keeps horizontal speed, so I4 dominates and I_max falls monotonically;
    # flat ties do not occur there, but the golden section must still respect the interval
    opt = optimize_landing_angle(vehicle, reference, deg(5), deg(30), closure=NI_MC)
    assert deg(5) <= opt.landing_angle <= deg(30)


def test_optimizer_all_infeasible(vehicle):
    with pytest.raises(NoSolutionError):
        optimize_landing_angle(vehicle, LandingScenario(1.0, 0.1, 0.0), deg(5), deg(30))


# ---------------------------------------------------------------------------
# entrance speed for a target exit


def test_entrance_roundtrip(vehicle, reference):
    v_exit = simulate_landing(vehicle, replace(reference, entrance_speed_x=1.1)).impulses.exit_velocity[0]
    v0 = solve_entrance_for_exit(vehicle, replace(reference, target_exit_speed=v_exit))
    assert v0 == pytest.approx(1.1, abs=1e-6)


def test_entrance_zero_target(vehicle, reference):
    assert solve_entrance_for_exit(vehicle, replace(reference, target_exit_speed=0.0), closure=NI_MC) == 0.0


def test_entrance_unreachable(vehicle, reference):
    with pytest.raises(NoSolutionError) as err:
        solve_entrance_for_exit(vehicle, replace(reference, target_exit_speed=5.0))
    lo, hi = err.value.achievable
    assert lo < hi < 5.0


def test_entrance_needs_target(vehicle, reference):
    with pytest.raises(ParameterError):
        solve_entrance_for_exit(vehicle, replace(reference, target_exit_speed=None))


# ---------------------------------------------------------------------------
# energy


@pytest.mark.parametrize("closure", [NI_MC, SP_MC])
@pytest.mark.parametrize("theta_deg", [5, 10, 15, 20, 25, 30])
def test_impacts_dissipate_on_reference_family(vehicle, reference, closure, theta_deg):
    chain = simulate_landing(vehicle, reference.with_angle(deg(theta_deg)), closure)
    o = chain.outcomes
    assert kinetic_energy(vehicle, o[1]) <= kinetic_energy(vehicle, o[0])
    assert kinetic_energy(vehicle, o[3]) <= kinetic_energy(vehicle, o[2])


def test_sticking_pivot_energy_counterexample(vehicle):
    """The sticking pivot can add kinetic energy; pinned so the caveat stays visible."""
    p = replace(vehicle, mass_total=8.58, inertia_pitch=0.436, wheelbase=0.340, wheel_radius=0.271)
    theta = 0.138
    sc = LandingScenario(2.85, 0.271 + 0.170 * math.sin(theta) + 0.358, theta)
    o = simulate_landing(p, sc, SP_MC).outcomes
    assert kinetic_energy(p, o[1]) > kinetic_energy(p, o[0])


def test_paper_faithful_energy_counterexample(vehicle):
    """Paper-faithful phase 4 can also add kinetic energy (long wheelbase, small wheels)."""
    p = replace(vehicle, mass_total=10.481, inertia_pitch=0.9967, wheelbase=0.951, wheel_radius=0.069)
    theta = 0.381
    sc = LandingScenario(1.27, 0.069 + 0.4755 * math.sin(theta) + 1.243, theta)
    o = simulate_landing(p, sc, NI_PF).outcomes
    assert kinetic_energy(p, o[3]) > kinetic_energy(p, o[2])
    # default closure on the same vehicle stays dissipative
    o = simulate_landing(p, sc, DEFAULT_CLOSURE).outcomes
    assert kinetic_energy(p, o[3]) <= kinetic_energy(p, o[2])


def test_closure_parse():
    assert ImpactClosure.parse("normal-impulse", "paper-faithful") == NI_PF
    assert ImpactClosure.parse() == SP_MC
    with pytest.raises(ParameterError):
        ImpactClosure.parse("bogus")
    assert SP_PF.final.value == "paper-faithful"
