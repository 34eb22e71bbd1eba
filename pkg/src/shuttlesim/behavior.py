"""Vehicle classes, per-driver sampling and Gipps-type driving behavior.

Two vehicle classes are predefined: ``HDV`` (human-driven sedan) and
``SHUTTLE`` (low-speed autonomous shuttle). Distributed parameters are
sampled per vehicle from a normal distribution truncated to ``[min, max]``.

Car following takes the lower of two Gipps speeds: a free-acceleration bound
and a braking-safe bound, both planned one reaction time ahead.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Dict, NamedTuple, Optional, Union

import numpy as np

from .units import MPH, speed_factor

# Required time gaps for yielding at a stop/yield line. A driver starts with
# FRESH_GAP and relaxes linearly to PATIENT_GAP over its yield time.
FRESH_GAP = 6.0
PATIENT_GAP = 3.0

SPEED_GAIN_RATIO = 0.9


@dataclass(frozen=True)
class ParamDist:
    min: float
    mean: float
    dev: float
    max: float

    def __post_init__(self):
        if not self.min <= self.mean <= self.max:
            raise ValueError(f"need min <= mean <= max, got {self}")
        if self.dev < 0:
            raise ValueError("deviation must be >= 0")

    @classmethod
    def fixed(cls, value: float) -> "ParamDist":
        return cls(value, value, 0.0, value)

    def sample(self, rng: np.random.Generator) -> float:
        if self.dev == 0 or self.min == self.max:
            return self.mean
        while True:
            x = rng.normal(self.mean, self.dev)
            if self.min <= x <= self.max:
                return float(x)


_DISTRIBUTED = ("speed_acceptance", "clearance", "yield_time", "max_accel", "normal_decel", "max_decel", "sensitivity")


@dataclass(frozen=True)
class VehicleClassParams:
    name: str
    length: float
    width: float
    max_speed: float  # inf => governed by the road speed limit
    speed_acceptance: ParamDist
    clearance: ParamDist
    yield_time: ParamDist
    reaction_normal: float
    reaction_at_stop: float
    reaction_at_signal: float
    max_accel: ParamDist
    normal_decel: ParamDist
    max_decel: ParamDist
    sensitivity: ParamDist
    min_time_gap: float = 0.0
    stay_in_overtaking_lane: bool = False
    imprudent_lane_change: bool = False

    def __post_init__(self):
        if not (self.length > 0 and self.width > 0 and self.max_speed > 0):
            raise ValueError(f"{self.name}: dimensions and max_speed must be > 0")
        for name in ("max_accel", "normal_decel", "max_decel"):
            if not getattr(self, name).min > 0:
                raise ValueError(f"{self.name}: {name} must be > 0")
        for name in ("reaction_normal", "reaction_at_stop", "reaction_at_signal"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{self.name}: {name} must be > 0")
        if self.min_time_gap < 0:
            raise ValueError(f"{self.name}: min_time_gap must be >= 0")

    def with_speed(self, max_speed: float) -> "VehicleClassParams":
        return replace(self, max_speed=max_speed)


HDV = VehicleClassParams(
    name="hdv",
    length=4.5,
    width=1.8,
    max_speed=math.inf,
    speed_acceptance=ParamDist(0.9, 1.0, 0.25, 1.2),
    clearance=ParamDist(0.5, 2.0, 0.5, 3.5),
    yield_time=ParamDist(5.0, 10.0, 2.5, 15.0),
    reaction_normal=0.8,
    reaction_at_stop=1.3,
    reaction_at_signal=1.7,
    max_accel=ParamDist(2.0, 5.0, 0.5, 6.0),
    normal_decel=ParamDist(2.5, 3.0, 0.5, 3.5),
    max_decel=ParamDist(4.0, 5.0, 0.5, 6.0),
    sensitivity=ParamDist.fixed(1.0),
    min_time_gap=0.0,
)

SHUTTLE = VehicleClassParams(
    name="shuttle",
    length=4.75,
    width=2.11,
    max_speed=9.5 * MPH,
    speed_acceptance=ParamDist.fixed(1.0),
    clearance=ParamDist.fixed(1.0),
    yield_time=ParamDist.fixed(6.0),
    reaction_normal=0.1,
    reaction_at_stop=0.1,
    reaction_at_signal=0.1,
    max_accel=ParamDist.fixed(3.0),
    normal_decel=ParamDist.fixed(2.0),
    max_decel=ParamDist.fixed(6.0),
    sensitivity=ParamDist(0.3, 0.7, 0.3, 0.9),
    min_time_gap=2.0,
)


@dataclass(frozen=True)
class DriverDraw:
    """One vehicle's realization of its class parameters."""

    vehicle_class: str
    length: float
    width: float
    max_speed: float
    speed_acceptance: float
    clearance: float
    yield_time: float
    reaction_normal: float
    reaction_at_stop: float
    reaction_at_signal: float
    max_accel: float
    normal_decel: float
    max_decel: float
    sensitivity: float
    min_time_gap: float
    stay_in_overtaking_lane: bool
    imprudent_lane_change: bool


def sample_driver(params: VehicleClassParams, rng: np.random.Generator) -> DriverDraw:
    """Draw every distributed parameter by truncated-normal rejection sampling."""
    values = {name: getattr(params, name).sample(rng) for name in _DISTRIBUTED}
    return DriverDraw(
        vehicle_class=params.name,
        length=params.length,
        width=params.width,
        max_speed=params.max_speed,
        reaction_normal=params.reaction_normal,
        reaction_at_stop=params.reaction_at_stop,
        reaction_at_signal=params.reaction_at_signal,
        min_time_gap=params.min_time_gap,
        stay_in_overtaking_lane=params.stay_in_overtaking_lane,
        imprudent_lane_change=params.imprudent_lane_change,
        **values,
    )


def mean_driver(params: VehicleClassParams) -> DriverDraw:
    """The draw with every distribution at its mean."""
    return sample_driver(replace(params, **{n: ParamDist.fixed(getattr(params, n).mean) for n in _DISTRIBUTED}),
                         np.random.default_rng(0))


def desired_speed(draw: DriverDraw, section_limit: float) -> float:
    return min(draw.max_speed, draw.speed_acceptance * section_limit)


def gipps_accel_component(v: float, V: float, A: float, tau: float) -> float:
    """Free-acceleration speed bound one reaction time ahead."""
    r = v / V
    return v + 2.5 * A * tau * (1.0 - r) * math.sqrt(0.025 + r)


def gipps_brake_component(v: float, v_leader: float, space_gap: float, D: float, D_hat: float,
                          tau: float, extra_time_gap: float = 0.0) -> float:
    """Braking-safe speed bound one reaction time ahead.

    ``space_gap`` is the spacing to the leader's rear net of the follower's
    clearance. ``D`` is the follower's braking rate and ``D_hat`` the rate it
    assumes for the leader. An infeasible situation (negative radicand)
    returns 0, i.e. stop as hard as possible.
    """
    h = 0.5 * (tau + extra_time_gap)
    rad = D * D * h * h + D * (2.0 * space_gap - v * tau + v_leader * v_leader / D_hat)
    if rad <= 0.0:
        return 0.0
    u = -D * h + math.sqrt(rad)
    return u if u > 0.0 else 0.0


class Leader(NamedTuple):
    """What a follower sees ahead: spacing from its front bumper to the
    obstacle's rear, the obstacle speed and its maximum deceleration.
    ``virtual`` obstacles (stop lines, red signals, transit stops) are
    approached without keeping clearance."""

    gap: float
    speed: float
    max_decel: float
    virtual: bool = False


def assumed_leader_decel(draw: DriverDraw, leader: Leader) -> float:
    # Never assume the leader brakes softer than we do ourselves: with that
    # floor the stop-distance condition keeps the gap non-negative at every
    # instant, not only at the final stop.
    return max(draw.sensitivity * leader.max_decel, draw.normal_decel)


def safe_speed(v: float, leader: Leader, draw: DriverDraw, tau: float) -> float:
    """Brake component for a follower described by ``draw``."""
    gap = leader.gap if leader.virtual else leader.gap - draw.clearance
    return gipps_brake_component(v, leader.speed, gap, draw.normal_decel,
                                 assumed_leader_decel(draw, leader), tau,
                                 0.0 if leader.virtual else draw.min_time_gap)


def car_following_speed(v: float, leader: Optional[Leader], draw: DriverDraw, section_limit: float,
                        tau: float, dt: float = 0.1, cap: float = math.inf) -> float:
    """Speed after one integration step of length ``dt``.

    The free-acceleration bound is the speed planned one reaction time
    ``tau`` ahead, so the vehicle covers ``dt/tau`` of the way there in one
    step. The braking-safe bound (and ``cap``) apply at once, which is never
    less safe than applying them after the reaction time. Physical
    acceleration and deceleration limits apply last.
    """
    V = desired_speed(draw, section_limit)
    if v < V:
        free = v + (gipps_accel_component(v, V, draw.max_accel, tau) - v) * (dt / tau if dt < tau else 1.0)
    else:
        free = V
    new = free if free < cap else cap
    if leader is not None:
        b = safe_speed(v, leader, draw, tau)
        if b < new:
            new = b
    if new > V:
        new = V
    hi = v + draw.max_accel * dt
    lo = v - draw.max_decel * dt
    if new > hi:
        new = hi
    elif new < lo:
        new = lo
    return new if new > 0.0 else 0.0


class Follower(NamedTuple):
    """A vehicle behind the subject: spacing from its front to the subject's
    rear, its speed and its driver draw."""

    gap: float
    speed: float
    draw: DriverDraw


class LaneOption(NamedTuple):
    leader: Optional[Leader]
    follower: Optional[Follower]
    achievable_speed: float


def _acceptable(v: float, leader: Leader, draw: DriverDraw, tau: float, imprudent: bool) -> bool:
    gap = leader.gap if leader.virtual else leader.gap - draw.clearance
    if gap < 0:
        return False
    decel = draw.max_decel if imprudent else draw.normal_decel
    return safe_speed(v, leader, draw, tau) >= v - decel * tau


def lane_change_decision(v: float, draw: DriverDraw, current_speed: float, target: Optional[LaneOption],
                         motivation: str, tau: Optional[float] = None, max_decel: Optional[float] = None) -> bool:
    """Whether to move into the target lane (True) or keep the current one.

    ``motivation`` is ``"turn"`` (lane needed for the next turn),
    ``"speed-gain"`` (overtaking) or ``"keep-right"`` (return to the slow lane
    after overtaking). Both the subject behind its new leader and the new
    follower behind the subject must be able to adapt at normal deceleration
    (maximum deceleration if the driver changes lanes imprudently).
    """
    if target is None:
        return False
    if motivation == "speed-gain":
        if not current_speed < SPEED_GAIN_RATIO * target.achievable_speed:
            return False
    elif motivation == "keep-right":
        if draw.stay_in_overtaking_lane or target.achievable_speed < current_speed:
            return False
    elif motivation != "turn":
        raise ValueError(f"unknown motivation {motivation!r}")
    tau = draw.reaction_normal if tau is None else tau
    if target.leader is not None and not _acceptable(v, target.leader, draw, tau, draw.imprudent_lane_change):
        return False
    if target.follower is not None:
        f = target.follower
        me = Leader(f.gap, v, draw.max_decel if max_decel is None else max_decel)
        if not _acceptable(f.speed, me, f.draw, f.draw.reaction_normal, draw.imprudent_lane_change):
            return False
    return True


def required_gap(waiting: float, yield_time: float, fresh: float = FRESH_GAP, patient: float = PATIENT_GAP) -> float:
    if yield_time <= 0 or waiting >= yield_time:
        return patient
    return fresh + (patient - fresh) * (waiting / yield_time)


def yield_gap_accept(waiting: float, draw: DriverDraw, conflicting_gap: float,
                     fresh: float = FRESH_GAP, patient: float = PATIENT_GAP) -> bool:
    """Accept a conflicting time gap after ``waiting`` seconds at the line."""
    if waiting < 0:
        raise ValueError("waiting must be >= 0")
    return conflicting_gap >= required_gap(waiting, draw.yield_time, fresh, patient) - 1e-9


# -- parameter files -------------------------------------------------------

def _dist_to_json(d: ParamDist, scale: float = 1.0):
    if d.dev == 0 and d.min == d.max:
        return d.mean / scale
    return {"min": d.min / scale, "mean": d.mean / scale, "dev": d.dev / scale, "max": d.max / scale}


def _dist_from_json(raw, scale: float = 1.0) -> ParamDist:
    if isinstance(raw, (int, float)):
        return ParamDist.fixed(float(raw) * scale)
    return ParamDist(raw["min"] * scale, raw["mean"] * scale, raw.get("dev", 0.0) * scale, raw["max"] * scale)


def class_params_to_dict(p: VehicleClassParams, speed_unit: str = "mph") -> dict:
    sf = speed_factor(speed_unit)
    out = {}
    for f in fields(p):
        val = getattr(p, f.name)
        if isinstance(val, ParamDist):
            out[f.name] = _dist_to_json(val)
        elif f.name == "max_speed":
            out[f.name] = None if math.isinf(val) else val / sf
        else:
            out[f.name] = val
    return out


def class_params_from_dict(raw: dict, speed_unit: str = "mph") -> VehicleClassParams:
    sf = speed_factor(speed_unit)
    kwargs = {}
    for f in fields(VehicleClassParams):
        if f.name not in raw:
            continue
        val = raw[f.name]
        if f.name in _DISTRIBUTED:
            kwargs[f.name] = _dist_from_json(val)
        elif f.name == "max_speed":
            kwargs[f.name] = math.inf if val is None else float(val) * sf
        else:
            kwargs[f.name] = val
    base = SHUTTLE if raw.get("name") == "shuttle" else HDV
    return replace(base, **kwargs)


def save_vehicle_params(classes: Dict[str, VehicleClassParams], path: Union[str, Path]) -> None:
    doc = {"units": {"speed": "mph", "length": "m", "accel": "m/s2", "time": "s"},
           "classes": {k: class_params_to_dict(v) for k, v in classes.items()}}
    Path(path).write_text(json.dumps(doc, indent=1))


def load_vehicle_params(path: Union[str, Path]) -> Dict[str, VehicleClassParams]:
    doc = json.loads(Path(path).read_text())
    unit = doc.get("units", {}).get("speed", "mph")
    return {k: class_params_from_dict({"name": k, **v}, unit) for k, v in doc["classes"].items()}


def default_classes() -> Dict[str, VehicleClassParams]:
    return {"hdv": HDV, "shuttle": SHUTTLE}

