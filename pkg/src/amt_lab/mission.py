"""Three-stage deploy-and-land mission against an idealized plant.

Stage 1 (before deployment): powered flight, every tracked quantity follows
its set-point with first-order dynamics until all are within 2%.
Stage 2 (deployment): thrust off, attitude held, ballistic descent until the
CoM reaches the disarm height.
Stage 3 (disarm): fully passive; the contact oracle handles touchdown, roll
and settling.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .errors import IncompleteLandingError, ParameterError, SimulationTimeout
from .kinematics import DEFAULT_CLOSURE, ImpactClosure
from .model import (
    REFERENCE_SCENARIO,
    ImpulseReport,
    LandingScenario,
    PlanarState,
    VehicleParams,
    com_height_at_contact,
)
from .oracle import OracleConfig, is_simultaneous, measure_impulses, simulate_from
from .oracle._pykernel import PITCH, VX, VY, W, X, Y
from .serialize import fmt, rounded

SAMPLE_INTERVAL = 1e-3  # s
TRACKING_TOLERANCE = 0.02
# absolute floors for the 2% rule when a set-point is zero
_ZERO_FLOOR = {"height": 1e-3, "speed": 1e-3, "pitch": math.radians(0.05)}


class Stage(str, enum.Enum):
    BEFORE_DEPLOYMENT = "before_deployment"
    DEPLOYMENT = "deployment"
    DISARM = "disarm"


class EventKind(str, enum.Enum):
    DEPLOYMENT_START = "DeploymentStart"
    DISARM = "Disarm"
    BACK_WHEEL_CONTACT = "BackWheelContact"
    FRONT_WHEEL_CONTACT = "FrontWheelContact"
    TERRESTRIAL_HANDOFF = "TerrestrialHandoff"


EVENT_ORDER = tuple(EventKind)


@dataclass(frozen=True)
class StageSetpoint:
    target_height: float  # m
    target_speed_x: float  # m/s
    target_pitch: float  # rad


@dataclass(frozen=True)
class MissionConfig:
    scenario: LandingScenario
    stage_setpoints: Mapping[Stage, StageSetpoint] = field(default_factory=dict)
    tracking_time_constant: float = 0.5  # s
    initial_state: PlanarState | None = None  # default: hover at the deployment height
    max_stage1_time: float = 30.0  # s

    def __post_init__(self):
        if self.scenario.disarm_height is None:
            raise ParameterError("mission needs a disarm height", "scenario.disarm_height")
        if not self.tracking_time_constant > 0:
            raise ParameterError("must be positive", "tracking_time_constant")
        points = {Stage(k): v for k, v in self.stage_setpoints.items()}
        sc = self.scenario
        points.setdefault(
            Stage.BEFORE_DEPLOYMENT,
            StageSetpoint(sc.deployment_height, sc.entrance_speed_x, sc.landing_angle),
        )
        object.__setattr__(self, "stage_setpoints", points)

    @property
    def deployment_setpoint(self) -> StageSetpoint:
        return self.stage_setpoints[Stage.BEFORE_DEPLOYMENT]

    def validate_for(self, params: VehicleParams) -> None:
        sc = self.scenario
        lim = params.limits
        if sc.disarm_height > sc.deployment_height:
            raise ParameterError("disarm height above deployment height", "disarm_height")
        hc = com_height_at_contact(params, sc.landing_angle)
        if sc.disarm_height < hc:
            raise ParameterError(
                f"disarm height {sc.disarm_height:.6g} m is below the contact CoM height {hc:.6g} m",
                "disarm_height",
            )
        if sc.deployment_height - hc > lim.max_intact_drop:
            raise ParameterError("drop exceeds the intact drop limit", "deployment_height")
        for stage, sp in self.stage_setpoints.items():
            where = f"stage_setpoints.{stage.value}"
            if abs(sp.target_speed_x) > lim.max_aerial_speed:
                raise ParameterError("speed set-point exceeds max aerial speed", f"{where}.target_speed_x")
            if abs(sp.target_pitch) > lim.max_pitch:
                raise ParameterError("pitch set-point exceeds max pitch", f"{where}.target_pitch")
            if sp.target_height < 0:
                raise ParameterError("negative height set-point", f"{where}.target_height")
        sp = self.deployment_setpoint
        pairs = (
            (sp.target_height, sc.deployment_height),
            (sp.target_speed_x, sc.entrance_speed_x),
            (sp.target_pitch, sc.landing_angle),
        )
        if not all(math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-12) for a, b in pairs):
            raise ParameterError(
                "deployment set-point must match the scenario (h, v0x, theta)",
                "stage_setpoints.before_deployment",
            )


@dataclass(frozen=True)
class MissionEvent:
    time: float
    kind: EventKind
    state_snapshot: PlanarState

    def as_dict(self) -> dict:
        s = self.state_snapshot
        return {
            "time": self.time,
            "kind": self.kind.value,
            "x": s.com_position[0],
            "y": s.com_position[1],
            "pitch_deg": math.degrees(s.pitch),
            "vx": s.com_velocity[0],
            "vy": s.com_velocity[1],
            "pitch_rate": s.pitch_rate,
        }


@dataclass
class MissionTrace:
    """Samples on a fixed 1 ms grid plus the event log.

    ``states`` rows are (x, y, pitch, vx, vy, pitch_rate); ``stages`` holds
    the stage label of each sample.
    """

    times: np.ndarray
    states: np.ndarray
    stages: list[Stage]
    events: list[MissionEvent]
    summary: ImpulseReport | None
    disarm_height: float
    deployment_vy: float  # residual vertical speed at DeploymentStart
    contact_height: float  # CoM height at back-wheel touchdown (analytic)
    time_step: float  # oracle step, the resolution of passive-stage events
    max_speed: float  # largest CoM speed during the passive descent
    gravity: float = 9.81
    simultaneous: bool = False  # wheels touched down within one step of each other

    @property
    def samples(self):
        for t, row, stage in zip(self.times, self.states, self.stages):
            yield float(t), _state(row), stage

    def event(self, kind: EventKind) -> MissionEvent | None:
        return next((e for e in self.events if e.kind is kind), None)

    def touchdown_check(self) -> dict:
        """Vertical speed at back-wheel contact against closed-form free fall."""
        dep = self.event(EventKind.DEPLOYMENT_START)
        back = self.event(EventKind.BACK_WHEEL_CONTACT)
        if dep is None or back is None:
            return {"expected_vy": math.nan, "measured_vy": math.nan, "relative_error": math.nan}
        dh = dep.state_snapshot.com_position[1] - self.contact_height
        g = self.gravity
        expected = -math.sqrt(self.deployment_vy ** 2 + 2.0 * g * dh)
        measured = back.state_snapshot.com_velocity[1]
        return {
            "expected_vy": expected,
            "measured_vy": measured,
            "relative_error": abs(measured / expected - 1.0),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "stage", "x", "y", "pitch_deg", "vx", "vy", "pitch_rate"])
        for t, row, stage in zip(self.times, self.states, self.stages):
            w.writerow(
                [fmt(t), stage.value, fmt(row[0]), fmt(row[1]), fmt(math.degrees(row[2])),
                 fmt(row[3]), fmt(row[4]), fmt(row[5])]
            )
        return buf.getvalue()

    def events_json(self) -> list[dict]:
        return [rounded(e.as_dict()) for e in self.events]


def _state(row) -> PlanarState:
    return PlanarState((float(row[0]), float(row[1])), float(row[2]), (float(row[3]), float(row[4])), float(row[5]))


def _within(value, target, floor):
    return abs(value - target) <= max(TRACKING_TOLERANCE * abs(target), floor)


def _track_stage1(mission: MissionConfig):
    """Exact first-order response sampled every millisecond, until all within 2%."""
    sp = mission.deployment_setpoint
    tau = mission.tracking_time_constant
    init = mission.initial_state or PlanarState((0.0, sp.target_height), 0.0, (0.0, 0.0), 0.0)
    x0 = init.com_position[0]
    y0, u0, p0 = init.com_position[1], init.com_velocity[0], init.pitch
    n_max = int(math.ceil(mission.max_stage1_time / SAMPLE_INTERVAL))
    rows = []
    for i in range(n_max + 1):
        t = i * SAMPLE_INTERVAL
        decay = math.exp(-t / tau)
        y = sp.target_height + (y0 - sp.target_height) * decay
        u = sp.target_speed_x + (u0 - sp.target_speed_x) * decay
        p = sp.target_pitch + (p0 - sp.target_pitch) * decay
        # x is the integral of the speed response
        x = x0 + sp.target_speed_x * t + (u0 - sp.target_speed_x) * tau * (1.0 - decay)
        vy = -(y - sp.target_height) / tau
        w = -(p - sp.target_pitch) / tau
        rows.append((x, y, p, u, vy, w))
        if (
            _within(y, sp.target_height, _ZERO_FLOOR["height"])
            and _within(u, sp.target_speed_x, _ZERO_FLOOR["speed"])
            and _within(p, sp.target_pitch, _ZERO_FLOOR["pitch"])
        ):
            return np.array(rows)
    raise SimulationTimeout(
        f"set-points not reached within {mission.max_stage1_time:g} s of powered flight"
    )


def run_mission(
    params: VehicleParams,
    mission: MissionConfig,
    oracle_config: OracleConfig | None = None,
    closure: ImpactClosure = DEFAULT_CLOSURE,
) -> MissionTrace:
    """Fly, deploy, disarm and land; returns the sampled trace and events.

    Raises SimulationTimeout if the contacts do not settle; the partial
    trace is attached as ``exc.partial``.
    """
    mission.validate_for(params)
    cfg = OracleConfig.for_closure(closure) if oracle_config is None else oracle_config
    sc = mission.scenario
    dt = cfg.time_step
    stride = int(round(SAMPLE_INTERVAL / dt))
    if stride < 1 or abs(stride * dt - SAMPLE_INTERVAL) > 1e-12:
        raise ParameterError("time step must divide the 1 ms sampling interval", "time_step")

    stage1 = _track_stage1(mission)
    t_dep = (len(stage1) - 1) * SAMPLE_INTERVAL
    dep = stage1[-1].copy()
    # ideal attitude hold: pose adjustment is complete at deployment
    dep[PITCH] = sc.landing_angle
    dep[W] = 0.0
    events = [MissionEvent(t_dep, EventKind.DEPLOYMENT_START, _state(dep))]

    result = simulate_from(params, cfg, tuple(dep), t0=t_dep)
    data, times = result.data, result.times
    ends = times + dt  # each row is the state at the end of its step
    cols = [X, Y, PITCH, VX, VY, W]
    passive = data[:, cols]

    below = np.flatnonzero(passive[:, 1] <= sc.disarm_height)
    i_dis = int(below[0]) if below.size else None
    if i_dis is not None:
        events.append(MissionEvent(float(ends[i_dis]), EventKind.DISARM, _state(passive[i_dis])))

    def onset_event(wheel, kind):
        ep = result.first(wheel)
        if ep is None:
            return
        i = int(round((ep.start_time - t_dep) / dt))
        # state at the instant of touchdown: end of the previous step
        row = passive[i - 1] if i > 0 else dep
        events.append(MissionEvent(ep.start_time, kind, _state(row)))

    onset_event("back", EventKind.BACK_WHEEL_CONTACT)
    onset_event("front", EventKind.FRONT_WHEEL_CONTACT)
    if result.settled:
        events.append(MissionEvent(float(ends[-1]), EventKind.TERRESTRIAL_HANDOFF, _state(passive[-1])))
    events.sort(key=lambda e: (e.time, EVENT_ORDER.index(e.kind)))

    idx = result.sample(SAMPLE_INTERVAL)
    p_times = ends[idx]
    stages2 = [
        Stage.DEPLOYMENT if i_dis is None or i < i_dis else Stage.DISARM for i in idx
    ]
    s1_times = np.arange(len(stage1)) * SAMPLE_INTERVAL
    try:
        summary = measure_impulses(result.episodes)
    except IncompleteLandingError:
        summary = None
    hc = com_height_at_contact(params, sc.landing_angle)
    speeds = np.hypot(passive[:, 3], passive[:, 4]) if len(passive) else np.zeros(1)
    trace = MissionTrace(
        times=np.concatenate((s1_times, p_times)),
        states=np.vstack((stage1, passive[idx])) if len(idx) else stage1,
        stages=[Stage.BEFORE_DEPLOYMENT] * len(stage1) + stages2,
        events=events,
        summary=summary,
        disarm_height=sc.disarm_height,
        deployment_vy=float(dep[VY]),
        contact_height=hc,
        time_step=dt,
        max_speed=float(max(speeds.max(), math.hypot(dep[VX], dep[VY]))),
        gravity=params.gravity,
        simultaneous=is_simultaneous(result.episodes),
    )
    if not result.settled:
        raise SimulationTimeout(
            f"contacts did not settle within {cfg.max_sim_time:g} s after deployment", partial=trace
        )
    return trace


@dataclass(frozen=True)
class RuleResult:
    rule: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class TransitionReport:
    rules: tuple[RuleResult, ...]
    simultaneous_contact: bool

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rules)

    def failures(self) -> list[RuleResult]:
        return [r for r in self.rules if not r.passed]

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "simultaneous_contact": self.simultaneous_contact,
            "rules": [{"rule": r.rule, "passed": r.passed, "detail": r.detail} for r in self.rules],
        }


def check_event_transitions(trace: MissionTrace) -> TransitionReport:
    """Event order, uniqueness and the disarm height window; never raises."""
    ev = trace.events
    kinds = [e.kind for e in ev]
    dt = trace.time_step
    rules = []

    counts = {k: kinds.count(k) for k in EVENT_ORDER}
    missing = [k.value for k, n in counts.items() if n != 1]
    rules.append(RuleResult("each_event_once", not missing, ", ".join(missing)))

    back = trace.event(EventKind.BACK_WHEEL_CONTACT)
    front = trace.event(EventKind.FRONT_WHEEL_CONTACT)
    simultaneous = (
        back is not None and front is not None and abs(front.time - back.time) <= dt * (1 + 1e-9)
    )

    order_ok = kinds == [k for k in EVENT_ORDER if k in kinds]
    rules.append(RuleResult("canonical_order", order_ok, " < ".join(k.value for k in kinds)))

    bad = []
    for a, b in zip(ev, ev[1:]):
        wheel_pair = {a.kind, b.kind} == {EventKind.BACK_WHEEL_CONTACT, EventKind.FRONT_WHEEL_CONTACT}
        if b.time > a.time or (simultaneous and wheel_pair and b.time >= a.time):
            continue
        bad.append(f"{a.kind.value}@{a.time:.9g} !< {b.kind.value}@{b.time:.9g}")
    rules.append(RuleResult("strictly_increasing_times", not bad, "; ".join(bad)))

    dis = trace.event(EventKind.DISARM)
    if dis is None:
        rules.append(RuleResult("disarm_height", False, "no Disarm event"))
    else:
        y = dis.state_snapshot.com_position[1]
        lo = trace.disarm_height - trace.max_speed * dt
        ok = lo <= y <= trace.disarm_height
        rules.append(RuleResult("disarm_height", ok, f"y={y:.9g} in [{lo:.9g}, {trace.disarm_height:.9g}]"))
    return TransitionReport(tuple(rules), simultaneous)


# ---------------------------------------------------------------------------
# mission documents

_SP_KEYS = {"target_height_m": 1.0, "target_speed_x_mps": 1.0, "target_pitch_deg": math.pi / 180.0}


def mission_from_mapping(doc: Mapping[str, Any]) -> MissionConfig:
    """Read the ``[mission]`` table of a vehicle-style document."""
    table = doc.get("mission")
    if not isinstance(table, Mapping):
        raise ParameterError("missing required table", "mission")

    def num(key, scale=1.0, where="mission"):
        src = table if where == "mission" else table[where.split(".", 1)[1]]
        if key not in src:
            raise ParameterError("missing required field", f"{where}.{key}")
        v = src[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ParameterError(f"expected a finite number, got {v!r}", f"{where}.{key}")
        return float(v) * scale

    theta = num("landing_angle_deg", math.pi / 180.0)
    if not 0.0 <= theta < 0.5 * math.pi:
        raise ParameterError("landing angle must lie in [0, 90) deg", "mission.landing_angle_deg")
    scenario = LandingScenario(
        entrance_speed_x=num("entrance_speed_mps"),
        deployment_height=num("deployment_height_m"),
        landing_angle=theta,
        disarm_height=num("disarm_height_m"),
    )
    points = {}
    for stage in Stage:
        if stage.value in table:
            where = f"mission.{stage.value}"
            if not isinstance(table[stage.value], Mapping):
                raise ParameterError("expected a table", where)
            points[stage] = StageSetpoint(*(num(k, s, where) for k, s in _SP_KEYS.items()))
    kwargs = {}
    if "tracking_time_constant_s" in table:
        kwargs["tracking_time_constant"] = num("tracking_time_constant_s")
    return MissionConfig(scenario=scenario, stage_setpoints=points, **kwargs)


def mission_to_mapping(mission: MissionConfig) -> dict:
    sc = mission.scenario
    doc = {
        "entrance_speed_mps": sc.entrance_speed_x,
        "deployment_height_m": sc.deployment_height,
        "disarm_height_m": sc.disarm_height,
        "landing_angle_deg": math.degrees(sc.landing_angle),
        "tracking_time_constant_s": mission.tracking_time_constant,
    }
    for stage, sp in mission.stage_setpoints.items():
        doc[stage.value] = {
            "target_height_m": sp.target_height,
            "target_speed_x_mps": sp.target_speed_x,
            "target_pitch_deg": math.degrees(sp.target_pitch),
        }
    return doc


# Documented example: the landing scenario of the impulse sweep, disarm at 0.3 m.
EXAMPLE_MISSION = MissionConfig(scenario=REFERENCE_SCENARIO)
