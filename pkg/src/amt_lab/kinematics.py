"""Analytic four-phase landing model and landing-angle optimization.

Phases: 1 free fall, 2 back-wheel impact, 3 roll on the back wheel until the
chassis is level, 4 front-wheel impact. Impacts are instantaneous; the
translational terms of every angular-momentum balance carry the mass, so
results depend on mass and inertia only through I/m.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import (
    AMTError,
    DegenerateGeometryError,
    InfeasibleScenarioError,
    ModelInconsistencyError,
    NoSolutionError,
    ParameterError,
    PhaseError,
    WrongPhaseError,
)
from .model import (
    ImpulseReport,
    LandingScenario,
    PhaseOutcome,
    VehicleParams,
    com_height_at_contact,
    contact_geometry,
)

LEVEL_TOLERANCE = 1e-9  # rad; front-wheel touchdown is pitch == 0
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class InitialClosure(str, enum.Enum):
    NORMAL_IMPULSE = "normal-impulse"
    STICKING_PIVOT = "sticking-pivot"


class FinalClosure(str, enum.Enum):
    PAPER_FAITHFUL = "paper-faithful"
    MOMENTUM_CONSERVING = "momentum-conserving"


@dataclass(frozen=True)
class ImpactClosure:
    """Extra assumptions that make the impact equations determinate.

    ``initial`` picks the back-wheel impact model: a purely vertical impulse
    through a free-spinning wheel (horizontal momentum kept), or a pivot that
    stops the wheel center outright. ``final`` picks the front-wheel model:
    angular momentum about the front contact with the chassis level and
    non-rotating afterwards, or horizontal momentum kept.
    """

    initial: InitialClosure = InitialClosure.STICKING_PIVOT
    final: FinalClosure = FinalClosure.MOMENTUM_CONSERVING

    @classmethod
    def parse(cls, initial: str | None = None, final: str | None = None) -> "ImpactClosure":
        d = cls()
        try:
            return cls(
                InitialClosure(initial) if initial else d.initial,
                FinalClosure(final) if final else d.final,
            )
        except ValueError as exc:
            raise ParameterError(str(exc), "closure") from exc


DEFAULT_CLOSURE = ImpactClosure()


@dataclass(frozen=True)
class Feasibility:
    pitch_ok: bool
    drop_ok: bool
    entrance_speed_ok: bool
    exit_speed_ok: bool

    @property
    def ok(self) -> bool:
        return self.pitch_ok and self.drop_ok and self.entrance_speed_ok and self.exit_speed_ok

    def as_dict(self) -> dict:
        return {
            "pitch_ok": self.pitch_ok,
            "drop_ok": self.drop_ok,
            "entrance_speed_ok": self.entrance_speed_ok,
            "exit_speed_ok": self.exit_speed_ok,
            "feasible": self.ok,
        }


@dataclass(frozen=True)
class LandingChainResult:
    outcomes: tuple[PhaseOutcome, PhaseOutcome, PhaseOutcome, PhaseOutcome]
    impulses: ImpulseReport
    feasibility: Feasibility
    landing_angle: float
    drop: float


@dataclass(frozen=True)
class SweepRecord:
    landing_angle: float
    report: ImpulseReport


def _cross(a, b):
    return a[0] * b[1] - a[1] * b[0]


# ---------------------------------------------------------------------------
# phase solvers


def solve_free_fall(params: VehicleParams, scenario: LandingScenario) -> PhaseOutcome:
    theta = scenario.landing_angle
    hc = com_height_at_contact(params, theta)
    drop = scenario.deployment_height - hc
    if drop <= 0:
        raise InfeasibleScenarioError(
            f"no free fall: deployment height {scenario.deployment_height:.6g} m <= contact "
            f"height {hc:.6g} m"
        )
    vy = -math.sqrt(2.0 * params.gravity * drop)
    return PhaseOutcome(1, (scenario.entrance_speed_x, vy), 0.0, hc, 0.0, theta)


def solve_initial_impact(
    params: VehicleParams,
    phase1: PhaseOutcome,
    theta: float,
    closure: ImpactClosure | InitialClosure = DEFAULT_CLOSURE,
) -> PhaseOutcome:
    if theta <= 0:
        raise WrongPhaseError("initial impact needs a positive landing angle (back wheel first)")
    kind = closure.initial if isinstance(closure, ImpactClosure) else InitialClosure(closure)
    geo = contact_geometry(params, theta)
    d2, db = geo.d2, geo.d_back
    k2 = params.gyration_sq
    v1 = phase1.com_velocity
    if kind is InitialClosure.NORMAL_IMPULSE:
        # v2x = v1x; wheel-center vertical velocity v2y - w2*db_x = 0
        den = d2[0] * db[0] + k2
        if not den > 0:
            raise DegenerateGeometryError("singular initial-impact system")
        w2 = d2[0] * v1[1] / den
        v2 = (v1[0], db[0] * w2)
    else:
        # wheel center at rest: v2 = w2 * z x d_back
        den = d2[0] * db[0] + d2[1] * db[1] + k2
        if not den > 0:
            raise DegenerateGeometryError("singular initial-impact system")
        w2 = _cross(d2, v1) / den
        v2 = (-db[1] * w2, db[0] * w2)
    hub_vx = v2[0] + w2 * db[1]
    return PhaseOutcome(2, v2, w2, phase1.com_height, hub_vx / params.wheel_radius, theta)


def solve_roll(params: VehicleParams, phase2: PhaseOutcome, theta: float) -> PhaseOutcome:
    w2 = phase2.pitch_rate
    if w2 > 0:
        raise WrongPhaseError(f"roll needs nose-down rotation, got pitch rate {w2:.6g} rad/s")
    if theta < 0:
        raise WrongPhaseError("negative landing angle")
    r = params.wheel_radius
    v2 = phase2.com_velocity
    if theta == 0.0:
        return PhaseOutcome(3, v2, w2, r, v2[0] / r, 0.0)
    half = params.half_wheelbase
    k2 = params.gyration_sq
    h2 = half * math.sin(theta)
    v3x = v2[0]
    # per unit mass: |v2|^2 + k2 w2^2 + 2 g h2 = v3x^2 + (half w3)^2 + k2 w3^2
    rhs = v2[0] * v2[0] + v2[1] * v2[1] + k2 * w2 * w2 + 2.0 * params.gravity * h2 - v3x * v3x
    if rhs < 0:
        raise ModelInconsistencyError("roll energy balance has no real root", residual=rhs)
    w3 = -math.sqrt(rhs / (half * half + k2))
    v3 = (v3x, w3 * half)
    return PhaseOutcome(3, v3, w3, r, v3x / r, 0.0)


def solve_final_impact(
    params: VehicleParams,
    phase3: PhaseOutcome,
    closure: ImpactClosure | FinalClosure = DEFAULT_CLOSURE,
) -> PhaseOutcome:
    if abs(phase3.pitch) >= LEVEL_TOLERANCE:
        raise WrongPhaseError(f"front-wheel impact needs a level chassis, pitch={phase3.pitch:.3g}")
    if phase3.pitch_rate > 0:
        raise WrongPhaseError("front-wheel impact needs nose-down or zero rotation")
    kind = closure.final if isinstance(closure, ImpactClosure) else FinalClosure(closure)
    r = params.wheel_radius
    v3 = phase3.com_velocity
    if kind is FinalClosure.PAPER_FAITHFUL:
        d4 = contact_geometry(params, 0.0).d4
        # m(d4 x v3) + I w3 = m(d4 x v4) with v4 = (v4x, 0): d4 x v4 = -d4_y v4x
        v4x = (_cross(d4, v3) + params.gyration_sq * phase3.pitch_rate) / (-d4[1])
    else:
        v4x = v3[0]
    return PhaseOutcome(4, (v4x, 0.0), 0.0, r, v4x / r, 0.0)


def compute_impulses(params: VehicleParams, chain) -> ImpulseReport:
    """Momentum jumps of the two impacts and their larger norm."""
    p1, p2, p3, p4 = chain
    m = params.mass_total
    v1, v2, v3, v4 = p1.com_velocity, p2.com_velocity, p3.com_velocity, p4.com_velocity
    i2 = (m * (v2[0] - v1[0]), m * (v2[1] - v1[1]))
    i4 = (m * (v4[0] - v3[0]), m * (v4[1] - v3[1]))
    return ImpulseReport.from_impulses(i2, i4, v4)


def simultaneous_landing(
    params: VehicleParams,
    scenario: LandingScenario,
    closure: ImpactClosure = DEFAULT_CLOSURE,
) -> ImpulseReport:
    """Level drop: both wheels strike together and the chassis stops falling.

    No rotation is induced, so the vertical momentum is removed in one jump
    and shared equally by the wheels. Frictionless wheels keep the forward
    speed; sticking wheels stop it. The report carries the back-wheel share
    as the initial impulse and the front-wheel share as the final one.
    """
    if scenario.landing_angle != 0.0:
        raise WrongPhaseError("simultaneous landing needs a level chassis")
    p1 = solve_free_fall(params, scenario)
    m = params.mass_total
    vx, vy = p1.com_velocity
    v_out = (vx, 0.0) if closure.initial is InitialClosure.NORMAL_IMPULSE else (0.0, 0.0)
    half = (0.5 * m * (v_out[0] - vx), 0.5 * m * (v_out[1] - vy))
    return ImpulseReport.from_impulses(half, half, v_out)


# ---------------------------------------------------------------------------
# residuals of the governing balances (relative)


def initial_momentum_residual(params, phase1, phase2, theta):
    d2 = contact_geometry(params, theta).d2
    m, inertia = params.mass_total, params.inertia_pitch
    before = m * _cross(d2, phase1.com_velocity) + inertia * phase1.pitch_rate
    after = m * _cross(d2, phase2.com_velocity) + inertia * phase2.pitch_rate
    scale = max(abs(before), abs(m * _cross(d2, phase2.com_velocity)), abs(inertia * phase2.pitch_rate), 1e-300)
    return abs(after - before) / scale


def initial_constraint_residual(params, phase2, theta):
    """Back-wheel-center vertical velocity after the impact, relative to |v2|."""
    db = contact_geometry(params, theta).d_back
    v2, w2 = phase2.com_velocity, phase2.pitch_rate
    hub_vy = v2[1] - w2 * db[0]
    return abs(hub_vy) / max(abs(v2[1]), abs(w2 * db[0]), 1e-300)


def roll_energy_residual(params, phase2, phase3, theta):
    m, inertia = params.mass_total, params.inertia_pitch
    h2 = params.half_wheelbase * math.sin(theta)
    v2, v3 = phase2.com_velocity, phase3.com_velocity
    e_before = 0.5 * m * (v2[0] ** 2 + v2[1] ** 2) + 0.5 * inertia * phase2.pitch_rate ** 2 + m * params.gravity * h2
    e_after = 0.5 * m * (v3[0] ** 2 + v3[1] ** 2) + 0.5 * inertia * phase3.pitch_rate ** 2
    return abs(e_after - e_before) / max(e_before, 1e-300)


def final_momentum_residual(params, phase3, phase4):
    """Angular momentum about the front contact point (the balance the paper-faithful closure imposes)."""
    d4 = contact_geometry(params, 0.0).d4
    m, inertia = params.mass_total, params.inertia_pitch
    before = m * _cross(d4, phase3.com_velocity) + inertia * phase3.pitch_rate
    after = m * _cross(d4, phase4.com_velocity) + inertia * phase4.pitch_rate
    scale = max(abs(m * _cross(d4, phase3.com_velocity)), abs(inertia * phase3.pitch_rate), abs(after), 1e-300)
    return abs(after - before) / scale


def kinetic_energy(params, outcome: PhaseOutcome) -> float:
    v = outcome.com_velocity
    return 0.5 * params.mass_total * (v[0] ** 2 + v[1] ** 2) + 0.5 * params.inertia_pitch * outcome.pitch_rate ** 2


# ---------------------------------------------------------------------------
# pipeline


def simulate_landing(
    params: VehicleParams,
    scenario: LandingScenario,
    closure: ImpactClosure = DEFAULT_CLOSURE,
) -> LandingChainResult:
    theta = scenario.landing_angle
    steps = (
        lambda: solve_free_fall(params, scenario),
        lambda p: solve_initial_impact(params, p, theta, closure),
        lambda p: solve_roll(params, p, theta),
        lambda p: solve_final_impact(params, p, closure),
    )
    outcomes = []
    for index, step in enumerate(steps, start=1):
        try:
            outcomes.append(step() if index == 1 else step(outcomes[-1]))
        except AMTError as exc:
            raise PhaseError(index, exc) from exc
    report = compute_impulses(params, outcomes)
    lim = params.limits
    drop = scenario.deployment_height - outcomes[0].com_height
    feas = Feasibility(
        pitch_ok=theta <= lim.max_pitch,
        drop_ok=drop <= lim.max_intact_drop,
        entrance_speed_ok=abs(scenario.entrance_speed_x) <= lim.max_aerial_speed,
        exit_speed_ok=abs(report.exit_velocity[0]) <= lim.max_terrestrial_speed,
    )
    return LandingChainResult(tuple(outcomes), report, feas, theta, drop)


def _check_interval(theta_min, theta_max, allow_point=False):
    ok = 0.0 < theta_min <= theta_max < 0.5 * math.pi if allow_point else 0.0 < theta_min < theta_max < 0.5 * math.pi
    if not ok:
        raise ParameterError(
            f"invalid landing-angle interval [{theta_min:.6g}, {theta_max:.6g}] rad", "theta_range"
        )


def angle_grid(theta_min: float, theta_max: float, steps: int) -> np.ndarray:
    return np.linspace(theta_min, theta_max, steps)


def sweep_landing_angle(
    params: VehicleParams,
    scenario: LandingScenario,
    theta_min: float,
    theta_max: float,
    steps: int,
    closure: ImpactClosure = DEFAULT_CLOSURE,
    workers: int | None = None,
) -> list[SweepRecord]:
    _check_interval(theta_min, theta_max)
    if int(steps) != steps or steps < 2:
        raise ParameterError("need at least 2 grid points", "steps")
    grid = [float(t) for t in angle_grid(theta_min, theta_max, int(steps))]

    def one(theta):
        return SweepRecord(theta, simulate_landing(params, scenario.with_angle(theta), closure).impulses)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, grid))
    return [one(t) for t in grid]


@dataclass(frozen=True)
class OptimumResult:
    landing_angle: float
    report: ImpulseReport
    chain: LandingChainResult


def _imax_or_inf(params, scenario, closure, theta):
    try:
        return simulate_landing(params, scenario.with_angle(theta), closure).impulses.impulse_max
    except PhaseError as exc:
        if isinstance(exc.cause, (InfeasibleScenarioError, WrongPhaseError, ModelInconsistencyError)):
            return math.inf
        raise


def golden_section(f, a: float, b: float, xtol: float, max_iter: int = 200):
    """Minimise a unimodal ``f`` on [a, b]; returns (x, f(x)) of the best point seen."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    best = (c, fc) if fc <= fd else (d, fd)
    for _ in range(max_iter):
        if b - a <= xtol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
            if fc < best[1] or (fc == best[1] and c < best[0]):
                best = (c, fc)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
            if fd < best[1] or (fd == best[1] and d < best[0]):
                best = (d, fd)
    return best


def optimize_landing_angle(
    params: VehicleParams,
    scenario: LandingScenario,
    theta_min: float,
    theta_max: float,
    tolerance: float = 1e-4,
    closure: ImpactClosure = DEFAULT_CLOSURE,
    coarse_points: int = 64,
) -> OptimumResult:
    """Coarse scan, then golden-section refinement in the best bracket.

    ``tolerance`` bounds the final bracket width; the search keeps shrinking
    to ``tolerance * 1e-6`` so the result also beats any finer grid.
    """
    _check_interval(theta_min, theta_max, allow_point=True)
    if not tolerance > 0:
        raise ParameterError("tolerance must be positive", "tolerance")

    def f(t):
        return _imax_or_inf(params, scenario, closure, t)

    if theta_min == theta_max:
        best_theta = theta_min
    else:
        grid = angle_grid(theta_min, theta_max, max(int(coarse_points), 64))
        values = np.array([f(float(t)) for t in grid])
        if not np.isfinite(values).any():
            raise NoSolutionError("no feasible landing angle in the interval")
        i = int(np.argmin(values))  # first minimum -> smallest theta on ties
        lo = float(grid[max(i - 1, 0)])
        hi = float(grid[min(i + 1, len(grid) - 1)])
        theta_g, val_g = golden_section(f, lo, hi, tolerance * 1e-6)
        best_theta = theta_g if val_g < values[i] else float(grid[i])
    try:
        chain = simulate_landing(params, scenario.with_angle(best_theta), closure)
    except PhaseError as exc:
        raise NoSolutionError(f"no feasible landing angle: {exc}") from exc
    return OptimumResult(best_theta, chain.impulses, chain)


def exit_speed(params, scenario, v0x, theta, closure=DEFAULT_CLOSURE) -> float:
    sc = LandingScenario(v0x, scenario.deployment_height, theta, scenario.disarm_height)
    return simulate_landing(params, sc, closure).impulses.exit_velocity[0]


def solve_entrance_for_exit(
    params: VehicleParams,
    scenario: LandingScenario,
    theta: float | None = None,
    closure: ImpactClosure = DEFAULT_CLOSURE,
    xtol: float = 1e-7,
    monotone_samples: int = 33,
) -> float:
    """Entrance speed in [0, max_aerial_speed] whose landing exits at the target speed."""
    target = scenario.target_exit_speed
    if target is None:
        raise ParameterError("scenario has no target exit speed", "target_exit_speed")
    theta = scenario.landing_angle if theta is None else theta
    hi = params.limits.max_aerial_speed

    def g(v):
        return exit_speed(params, scenario, v, theta, closure) - target

    samples = [exit_speed(params, scenario, float(v), theta, closure) for v in np.linspace(0.0, hi, monotone_samples)]
    steps = np.diff(samples)
    if not ((steps >= 0).all() or (steps <= 0).all()):
        raise NoSolutionError("exit speed is not monotone in entrance speed on [0, max_aerial_speed]")
    lo_val, hi_val = min(samples[0], samples[-1]), max(samples[0], samples[-1])
    if not lo_val <= target <= hi_val:
        raise NoSolutionError(
            f"target exit speed {target:.6g} m/s outside achievable range [{lo_val:.6g}, {hi_val:.6g}]",
            achievable=(lo_val, hi_val),
        )
    a, b = 0.0, hi
    ga = g(a)
    if ga == 0.0:
        return a
    if g(b) == 0.0:
        return b
    while b - a > xtol * 1e-6:
        mid = 0.5 * (a + b)
        gm = g(mid)
        if gm == 0.0:
            return mid
        if (gm > 0) == (ga > 0):
            a, ga = mid, gm
        else:
            b = mid
    return 0.5 * (a + b)
