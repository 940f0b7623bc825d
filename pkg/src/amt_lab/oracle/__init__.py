"""Time-stepping planar rigid-body oracle with penalty wheel contacts.

Independent of the analytic phase model: the chassis is integrated with
semi-implicit Euler under gravity and two unilateral spring-damper contacts
at the wheels (massless rigid disks fixed to the chassis). Impact impulses
are measured as force-time integrals over contact episodes.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import DivergenceError, IncompleteLandingError, ParameterError, SimulationTimeout
from ..kinematics import DEFAULT_CLOSURE, ImpactClosure, InitialClosure
from ..model import ImpulseReport, LandingScenario, PlanarState, VehicleParams
from ..serialize import fmt
from . import _backend
from ._pykernel import FBX, FBY, FFX, FFY, NCOL, PEN_B, PEN_F, PITCH, VX, VY, W, X, Y

BACKEND = _backend.BACKEND


class TangentialModel(str, enum.Enum):
    FRICTIONLESS = "frictionless"
    VISCOUS = "viscous"


@dataclass(frozen=True)
class OracleConfig:
    contact_stiffness: float = 1e6  # N/m
    contact_damping: float = 5e3  # N s/m
    time_step: float = 1e-5  # s
    max_sim_time: float = 3.0  # s
    contact_epsilon: float = 1e-4  # m
    tangential_model: TangentialModel = TangentialModel.FRICTIONLESS
    viscous_coefficient: float = 5e4  # N s/m, viscous model only
    settle_window: float = 0.1  # s
    settle_tolerance: float = 0.01
    merge_gap: float = 1e-3  # s, episodes closer than this share one chassis window

    def __post_init__(self):
        object.__setattr__(self, "tangential_model", TangentialModel(self.tangential_model))
        if not self.contact_stiffness > 0:
            raise ParameterError("must be positive", "contact_stiffness")
        if not self.contact_damping >= 0:
            raise ParameterError("must be non-negative", "contact_damping")
        if not 0 < self.time_step <= 1e-4:
            raise ParameterError("must lie in (0, 1e-4] s", "time_step")
        if not self.contact_epsilon > 0:
            raise ParameterError("must be positive", "contact_epsilon")
        if not self.merge_gap >= 0:
            raise ParameterError("must be non-negative", "merge_gap")
        if not self.max_sim_time > 0:
            raise ParameterError("must be positive", "max_sim_time")
        if self.tangential_model is TangentialModel.VISCOUS and not self.viscous_coefficient > 0:
            raise ParameterError("must be positive", "viscous_coefficient")

    @property
    def tangential_coefficient(self) -> float:
        return self.viscous_coefficient if self.tangential_model is TangentialModel.VISCOUS else 0.0

    @classmethod
    def for_closure(cls, closure: ImpactClosure = DEFAULT_CLOSURE, **overrides) -> "OracleConfig":
        """Frictionless contacts mirror the normal-impulse closure, viscous ones the sticking pivot."""
        tangential = (
            TangentialModel.VISCOUS
            if closure.initial is InitialClosure.STICKING_PIVOT
            else TangentialModel.FRICTIONLESS
        )
        overrides.setdefault("tangential_model", tangential)
        return cls(**overrides)


@dataclass(frozen=True)
class ContactEpisode:
    wheel: str  # "back" | "front"
    start_time: float
    end_time: float
    impulse: tuple[float, float]  # this wheel's contact force integral
    peak_force: float
    chassis_impulse: tuple[float, float] = (0.0, 0.0)  # both wheels over the same window
    exit_velocity: tuple[float, float] = (math.nan, math.nan)  # CoM velocity at end_time

    def as_dict(self) -> dict:
        return {
            "wheel": self.wheel,
            "start_time": self.start_time,
            "end_time": self.end_time,
            "impulse": list(self.impulse),
            "peak_force": self.peak_force,
            "chassis_impulse": list(self.chassis_impulse),
        }


def _kernel_args(params: VehicleParams, config: OracleConfig):
    return (
        params.mass_total,
        params.inertia_pitch,
        params.gravity,
        params.wheel_radius,
        params.half_wheelbase,
        config.contact_stiffness,
        config.contact_damping,
        config.tangential_coefficient,
        config.time_step,
    )


def _wheel_spins(params, pitch, vx, w, pen_b, pen_f, prev=(0.0, 0.0)):
    half, r = params.half_wheelbase, params.wheel_radius
    oy = half * math.sin(pitch)
    back = (vx + w * oy) / r if pen_b > 0 else prev[0]
    front = (vx - w * oy) / r if pen_f > 0 else prev[1]
    return back, front


def step_dynamics(state: PlanarState, params: VehicleParams, config: OracleConfig) -> PlanarState:
    """Advance one time step (gravity plus per-wheel penalty contact)."""
    buf = [state.com_position[0], state.com_position[1], state.pitch,
           state.com_velocity[0], state.com_velocity[1], state.pitch_rate]
    out = np.zeros((1, NCOL))
    done = _backend.python_integrate(buf, *_kernel_args(params, config), 1, out)
    if done < 1:
        raise DivergenceError(config.time_step)
    row = out[0]
    spins = _wheel_spins(params, buf[2], buf[3], buf[5], row[PEN_B], row[PEN_F],
                         (state.wheel_spin_back, state.wheel_spin_front))
    return PlanarState((buf[0], buf[1]), buf[2], (buf[3], buf[4]), buf[5], *spins)


def _runs(mask: np.ndarray):
    """(start, stop) index pairs of the True runs of a boolean array."""
    if mask.size == 0:
        return []
    padded = np.concatenate(([False], mask, [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    return list(zip(edges[0::2].tolist(), edges[1::2].tolist()))


def segment_episodes(times, data, dt, epsilon, wheel):
    """Contact episodes of one wheel from kernel output rows.

    An episode is a run where penetration exceeds ``epsilon``. Its window is
    extended back to the touchdown that started it when the wheel was airborne
    just before, so the damping-dominated first instants of the impact count.
    ``times[i]`` is the start time of step ``i``.
    """
    if wheel == "back":
        pen, fx, fy = data[:, PEN_B], data[:, FBX], data[:, FBY]
    else:
        pen, fx, fy = data[:, PEN_F], data[:, FFX], data[:, FFY]
    fx_all = data[:, FBX] + data[:, FFX]
    fy_all = data[:, FBY] + data[:, FFY]
    contact = pen > 0.0
    contact_runs = _runs(contact)
    episodes = []
    prev_stop = 0
    for start, stop in _runs(pen > epsilon):
        onset = start
        for c0, c1 in contact_runs:
            if c0 <= start < c1:
                onset = c0 if c0 >= prev_stop else start
                break
        sl = slice(onset, stop)
        end_time = times[stop - 1] + dt
        last = min(stop - 1, len(data) - 1)
        episodes.append(
            ContactEpisode(
                wheel=wheel,
                start_time=float(times[onset]),
                end_time=float(end_time),
                impulse=(float(fx[sl].sum() * dt), float(fy[sl].sum() * dt)),
                peak_force=float(np.hypot(fx[sl], fy[sl]).max()),
                chassis_impulse=(float(fx_all[sl].sum() * dt), float(fy_all[sl].sum() * dt)),
                exit_velocity=(float(data[last, VX]), float(data[last, VY])),
            )
        )
        prev_stop = stop
    return episodes


def merge_chassis_windows(episodes, times, data, dt, gap):
    """Widen each episode's chassis window over episodes that follow within ``gap``.

    A compliant final impact is not one pulse: the front wheel strike can
    unload and then reload the back wheel a fraction of a millisecond later.
    The chassis impulse of an episode therefore integrates both wheels from
    its onset until the chain of nearby episodes ends.
    """
    if not episodes:
        return episodes
    fx = np.concatenate(([0.0], np.cumsum(data[:, FBX] + data[:, FFX])))
    fy = np.concatenate(([0.0], np.cumsum(data[:, FBY] + data[:, FFY])))
    t0 = float(times[0])
    merged = []
    for i, ep in enumerate(episodes):
        end = ep.end_time
        for other in episodes[i + 1:]:
            if other.start_time > end + gap:
                break
            end = max(end, other.end_time)
        a = int(round((ep.start_time - t0) / dt))
        b = min(int(round((end - t0) / dt)), len(data))
        merged.append(replace(ep, chassis_impulse=(float((fx[b] - fx[a]) * dt), float((fy[b] - fy[a]) * dt))))
    return merged


@dataclass
class DropResult:
    """Full-resolution output of one oracle run."""

    params: VehicleParams
    config: OracleConfig
    times: np.ndarray  # start time of each step
    data: np.ndarray  # kernel rows, see _pykernel column constants
    initial: np.ndarray  # (x, y, pitch, vx, vy, w) before the first step
    settled: bool
    episodes: list[ContactEpisode] = field(default_factory=list)

    @property
    def end_time(self) -> float:
        if not len(self.times):
            return math.nan
        return float(self.times[-1] + self.config.time_step)

    def first(self, wheel: str) -> ContactEpisode | None:
        return next((e for e in self.episodes if e.wheel == wheel), None)

    def impulses(self) -> ImpulseReport:
        return measure_impulses(self.episodes)

    def sample(self, interval: float = 1e-3) -> np.ndarray:
        """Row indices of the step ends closest to a fixed sampling grid."""
        stride = max(1, int(round(interval / self.config.time_step)))
        return np.arange(stride - 1, len(self.times), stride)

    def state_at(self, i: int) -> PlanarState:
        row = self.data[i]
        spins = _wheel_spins(self.params, row[PITCH], row[VX], row[W], row[PEN_B], row[PEN_F])
        return PlanarState((row[X], row[Y]), row[PITCH], (row[VX], row[VY]), row[W], *spins)

    @property
    def max_penetration(self) -> float:
        if not len(self.data):
            return 0.0
        return float(max(self.data[:, PEN_B].max(), self.data[:, PEN_F].max()))

    def to_csv(self, interval: float = 1e-3) -> str:
        """Sampled trajectory with the per-wheel normal forces."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "y", "pitch_deg", "vx", "vy", "pitch_rate", "f_back_y", "f_front_y"])
        dt = self.config.time_step
        for i in self.sample(interval):
            row = self.data[i]
            w.writerow([fmt(self.times[i] + dt), fmt(row[X]), fmt(row[Y]), fmt(math.degrees(row[PITCH])),
                        fmt(row[VX]), fmt(row[VY]), fmt(row[W]), fmt(row[FBY]), fmt(row[FFY])])
        return buf.getvalue()

    def trajectory(self, interval: float = 1e-3):
        """Sampled (time, PlanarState) pairs; time is the end of the step."""
        dt = self.config.time_step
        return [(float(self.times[i] + dt), self.state_at(i)) for i in self.sample(interval)]


def _settled(data, window_steps, tol):
    if len(data) < window_steps:
        return False
    tail = data[-window_steps:]
    for col in (FBY, FFY):
        f = tail[:, col]
        lo, hi = f.min(), f.max()
        if lo <= 0.0 or hi - lo > tol * f.mean():
            return False
    return True


def simulate_from(
    params: VehicleParams,
    config: OracleConfig,
    initial: tuple,
    t0: float = 0.0,
    stop_when_settled: bool = True,
    max_time: float | None = None,
    chunk_time: float = 0.05,
) -> DropResult:
    """Integrate from ``initial`` = (x, y, pitch, vx, vy, w) until settled or timeout."""
    dt = config.time_step
    horizon = config.max_sim_time if max_time is None else max_time
    total = int(round(horizon / dt))
    chunk = max(1, int(round(chunk_time / dt)))
    window = int(round(config.settle_window / dt))
    state = np.array(initial, dtype=float)
    init = state.copy()
    out = np.empty((total, NCOL))
    args = _kernel_args(params, config)
    done = 0
    settled = False
    seen_back = seen_front = False
    while done < total:
        n = min(chunk, total - done)
        got = _backend.integrate(state, *args, n, out[done:done + n])
        if got < n:
            raise DivergenceError(t0 + (done + got + 1) * dt)
        seen_back = seen_back or bool((out[done:done + n, PEN_B] > config.contact_epsilon).any())
        seen_front = seen_front or bool((out[done:done + n, PEN_F] > config.contact_epsilon).any())
        done += n
        if stop_when_settled and seen_back and seen_front and _settled(out[:done], window, config.settle_tolerance):
            settled = True
            break
    data = out[:done]
    times = t0 + np.arange(done) * dt
    result = DropResult(params, config, times, data, init, settled)
    eps = config.contact_epsilon
    episodes = segment_episodes(times, data, dt, eps, "back") + segment_episodes(times, data, dt, eps, "front")
    episodes = sorted(episodes, key=lambda e: (e.start_time, e.wheel != "back"))
    result.episodes = merge_chassis_windows(episodes, times, data, dt, config.merge_gap)
    return result


def run_drop(
    params: VehicleParams,
    scenario: LandingScenario,
    config: OracleConfig | None = None,
) -> DropResult:
    """Release at the deployment height with pitch = landing angle and velocity (v0x, 0).

    Raises SimulationTimeout (carrying the partial DropResult) if the
    contacts do not settle within ``config.max_sim_time``.
    """
    config = OracleConfig() if config is None else config
    scenario.validate_for(params)
    initial = (0.0, scenario.deployment_height, scenario.landing_angle, scenario.entrance_speed_x, 0.0, 0.0)
    result = simulate_from(params, config, initial)
    if not result.settled:
        raise SimulationTimeout(
            f"contacts did not settle within {config.max_sim_time:g} s", partial=result
        )
    return result


def _simultaneous(back: ContactEpisode, front: ContactEpisode) -> bool:
    return back.start_time < front.end_time and front.start_time < back.end_time


def measure_impulses(episodes, exit_velocity=None) -> ImpulseReport:
    """Initial impulse from the first back-wheel episode, final from the first front one.

    The final impulse is the chassis total over the front episode's merged
    window (front wheel plus any back-wheel reaction during the strike), the
    quantity an instantaneous momentum jump describes. When the two first episodes
    overlap (level drop) each wheel's own integral is used instead.
    """
    back = next((e for e in episodes if e.wheel == "back"), None)
    front = next((e for e in episodes if e.wheel == "front"), None)
    if back is None or front is None:
        missing = "back" if back is None else "front"
        raise IncompleteLandingError(f"no {missing}-wheel contact episode")
    if _simultaneous(back, front):
        i2, i4 = back.impulse, front.impulse
    else:
        i2, i4 = back.impulse, front.chassis_impulse
    v = front.exit_velocity if exit_velocity is None else exit_velocity
    return ImpulseReport.from_impulses(i2, i4, v)


def is_simultaneous(episodes) -> bool:
    back = next((e for e in episodes if e.wheel == "back"), None)
    front = next((e for e in episodes if e.wheel == "front"), None)
    return back is not None and front is not None and _simultaneous(back, front)
