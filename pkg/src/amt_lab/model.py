"""Vehicle parameters, landing scenarios, planar geometry and shared records.

Conventions: x forward (direction of travel), y up, rotation positive
counterclockwise, i.e. nose-up. Angles are radians here; degrees appear only
at the CLI and file boundaries. The back wheel trails and touches first for
a positive landing angle.
"""
from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .errors import InfeasibleScenarioError, ParameterError

Vec2 = tuple[float, float]


def _positive(value, name):
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ParameterError(f"expected a number, got {value!r}", name)
    if not math.isfinite(value) or value <= 0:
        raise ParameterError(f"must be positive, got {value!r}", name)
    return float(value)


@dataclass(frozen=True)
class ControlLimits:
    max_aerial_speed: float
    max_terrestrial_speed: float
    max_roll: float  # rad
    max_pitch: float  # rad
    max_intact_drop: float
    max_flyable_drop: float

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, _positive(getattr(self, f.name), f"limits.{f.name}"))
        if self.max_intact_drop > self.max_flyable_drop:
            raise ParameterError("max_intact_drop exceeds max_flyable_drop", "limits.max_intact_drop")


@dataclass(frozen=True)
class VehicleParams:
    mass_total: float
    inertia_pitch: float
    gravity: float
    wheel_radius: float
    wheelbase: float
    limits: ControlLimits

    def __post_init__(self):
        for name in ("mass_total", "inertia_pitch", "gravity", "wheel_radius"):
            object.__setattr__(self, name, _positive(getattr(self, name), name))
        wb = self.wheelbase
        if not isinstance(wb, (int, float)) or isinstance(wb, bool) or not math.isfinite(wb) or wb < 0:
            raise ParameterError(f"must be non-negative, got {wb!r}", "wheelbase")
        object.__setattr__(self, "wheelbase", float(wb))

    @property
    def half_wheelbase(self) -> float:
        return 0.5 * self.wheelbase

    @property
    def gyration_sq(self) -> float:
        """Squared radius of gyration I/m; every velocity result depends on m and I only through it."""
        return self.inertia_pitch / self.mass_total

    def scaled(self, k: float) -> "VehicleParams":
        return replace(self, mass_total=self.mass_total * k, inertia_pitch=self.inertia_pitch * k)


@dataclass(frozen=True)
class LandingScenario:
    entrance_speed_x: float
    deployment_height: float
    landing_angle: float
    disarm_height: float | None = None
    target_exit_speed: float | None = None

    def __post_init__(self):
        for name in ("entrance_speed_x", "deployment_height", "landing_angle"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ParameterError(f"expected a finite number, got {v!r}", name)
        if not 0.0 <= self.landing_angle < 0.5 * math.pi:
            raise ParameterError("landing angle must lie in [0, pi/2)", "landing_angle")
        if self.disarm_height is not None and self.disarm_height > self.deployment_height:
            raise ParameterError("disarm height above deployment height", "disarm_height")
        if self.target_exit_speed is not None and self.target_exit_speed < 0:
            raise ParameterError("target exit speed must be >= 0", "target_exit_speed")

    def with_angle(self, theta: float) -> "LandingScenario":
        return replace(self, landing_angle=theta)

    def validate_for(self, params: VehicleParams) -> None:
        hc = com_height_at_contact(params, self.landing_angle)
        if self.deployment_height <= hc:
            raise InfeasibleScenarioError(
                f"deployment height {self.deployment_height:.6g} m is not above the contact "
                f"CoM height {hc:.6g} m"
            )


@dataclass(frozen=True)
class PlanarState:
    com_position: Vec2 = (0.0, 0.0)
    pitch: float = 0.0
    com_velocity: Vec2 = (0.0, 0.0)
    pitch_rate: float = 0.0
    wheel_spin_back: float = 0.0
    wheel_spin_front: float = 0.0


@dataclass(frozen=True)
class PhaseOutcome:
    phase_index: int
    com_velocity: Vec2
    pitch_rate: float
    com_height: float
    wheel_spin: float = 0.0
    pitch: float = 0.0

    def __post_init__(self):
        if self.phase_index not in (1, 2, 3, 4):
            raise ParameterError(f"phase index {self.phase_index} outside 1..4", "phase_index")
        if self.com_height < 0:
            raise ParameterError("negative CoM height", "com_height")


@dataclass(frozen=True)
class ImpulseReport:
    impulse_initial: Vec2
    impulse_final: Vec2
    impulse_max: float
    exit_velocity: Vec2

    @property
    def initial_norm(self) -> float:
        return math.hypot(*self.impulse_initial)

    @property
    def final_norm(self) -> float:
        return math.hypot(*self.impulse_final)

    @classmethod
    def from_impulses(cls, i2: Vec2, i4: Vec2, exit_velocity: Vec2) -> "ImpulseReport":
        return cls(i2, i4, max(math.hypot(*i2), math.hypot(*i4)), exit_velocity)


@dataclass(frozen=True)
class ContactGeometry:
    """Planar lever arms; all vectors point toward the CoM except ``r``."""

    d2: Vec2  # back contact point -> CoM
    d4: Vec2  # front contact point -> CoM
    r: Vec2  # contact point -> wheel center
    d_back: Vec2  # back wheel center -> CoM
    d_front: Vec2  # front wheel center -> CoM


def contact_geometry(params: VehicleParams, pitch: float) -> ContactGeometry:
    if not 0.0 <= pitch < 0.5 * math.pi:
        raise ParameterError("pitch must lie in [0, pi/2)", "pitch")
    half = params.half_wheelbase
    d_back = (half * math.cos(pitch), half * math.sin(pitch))
    d_front = (-d_back[0], -d_back[1])
    r = (0.0, params.wheel_radius)
    return ContactGeometry(
        d2=(d_back[0] + r[0], d_back[1] + r[1]),
        d4=(d_front[0] + r[0], d_front[1] + r[1]),
        r=r,
        d_back=d_back,
        d_front=d_front,
    )


def com_height_at_contact(params: VehicleParams, pitch: float) -> float:
    """CoM height when the back wheel first touches flat ground at ``pitch``."""
    return params.wheel_radius + params.half_wheelbase * math.sin(pitch)


# ---------------------------------------------------------------------------
# parameter documents

_TOP_KEYS = {
    "mass_total_kg": "mass_total",
    "inertia_pitch_kgm2": "inertia_pitch",
    "gravity_mps2": "gravity",
    "wheel_radius_m": "wheel_radius",
    "wheelbase_m": "wheelbase",
}
_LIMIT_KEYS = {
    "max_aerial_speed_mps": ("max_aerial_speed", 1.0),
    "max_terrestrial_speed_mps": ("max_terrestrial_speed", 1.0),
    "max_roll_deg": ("max_roll", math.pi / 180.0),
    "max_pitch_deg": ("max_pitch", math.pi / 180.0),
    "max_intact_drop_m": ("max_intact_drop", 1.0),
    "max_flyable_drop_m": ("max_flyable_drop", 1.0),
}


def parse_document(source: str | Path | Mapping[str, Any]) -> dict:
    """Return the raw mapping of a TOML/JSON document (or a mapping as-is)."""
    if isinstance(source, Mapping):
        return dict(source)
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParameterError(f"cannot read {path}: {exc.strerror}", str(path)) from exc
    try:
        if path.suffix.lower() == ".json":
            doc = json.loads(text)
        else:
            doc = tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ParameterError(f"malformed document: {exc}", str(path)) from exc
    if not isinstance(doc, dict):
        raise ParameterError("document root must be a table/object", str(path))
    return doc


def params_from_mapping(doc: Mapping[str, Any]) -> VehicleParams:
    values = {}
    for key, attr in _TOP_KEYS.items():
        if key not in doc:
            raise ParameterError("missing required field", key)
        values[attr] = doc[key]
    raw_limits = doc.get("limits")
    if not isinstance(raw_limits, Mapping):
        raise ParameterError("missing required table", "limits")
    lim = {}
    for key, (attr, scale) in _LIMIT_KEYS.items():
        if key not in raw_limits:
            raise ParameterError("missing required field", f"limits.{key}")
        v = raw_limits[key]
        _positive(v, f"limits.{key}")
        lim[attr] = v * scale
    return VehicleParams(limits=ControlLimits(**lim), **values)


def params_to_mapping(params: VehicleParams) -> dict:
    doc = {key: getattr(params, attr) for key, attr in _TOP_KEYS.items()}
    doc["limits"] = {
        key: getattr(params.limits, attr) / scale for key, (attr, scale) in _LIMIT_KEYS.items()
    }
    return doc


def load_vehicle_params(source: str | Path | Mapping[str, Any] | None = None) -> VehicleParams:
    """Load and validate a vehicle document; ``None`` gives the shipped default."""
    if source is None:
        text = resources.files("amt_lab.profiles").joinpath("default.toml").read_text()
        return params_from_mapping(tomllib.loads(text))
    return params_from_mapping(parse_document(source))


def default_vehicle() -> VehicleParams:
    return load_vehicle_params(None)


# Reference case: 1.3 m/s entrance, 0.65 m deployment height, 0.5 m/s desired exit.
REFERENCE_SCENARIO = LandingScenario(
    entrance_speed_x=1.3,
    deployment_height=0.65,
    landing_angle=math.radians(20.0),
    disarm_height=0.3,
    target_exit_speed=0.5,
)
