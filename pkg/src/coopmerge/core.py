"""Coordinates, road layout, vehicle state and piecewise constant-acceleration plans.

Conventions used throughout the package:

* ``x`` is the FRONT-bumper position in metres along a single signed axis.
  ``x = 0`` is the start of the parallel acceleration lane, upstream is negative.
  A "distance to the acceleration-lane start" ``S`` is therefore ``-x``.
* Bumper gaps subtract the leader's length only.
* Speeds never go negative; braking clamps at standstill.
"""

from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np


class VehicleClass(str, enum.Enum):
    CAV = "CAV"
    CAT = "CAT"


@dataclass(frozen=True)
class VehicleClassParams:
    """Physical limits of one vehicle class.

    ``decel_max`` is a positive magnitude. ``accel_min`` is the lower bound on
    any positive acceleration command issued by the controller.
    """

    vclass: VehicleClass
    length: float
    accel_max: float
    decel_max: float
    accel_min: float = 0.0

    def __post_init__(self):
        if self.length <= 0:
            raise ValueError("length must be positive")
        if self.decel_max <= 0:
            raise ValueError("decel_max must be positive")
        if not 0.0 <= self.accel_min <= self.accel_max:
            raise ValueError("need 0 <= accel_min <= accel_max")


CAV = VehicleClassParams(VehicleClass.CAV, length=5.0, accel_max=2.5, decel_max=4.5)
CAT = VehicleClassParams(VehicleClass.CAT, length=7.0, accel_max=1.5, decel_max=4.0)

CLASS_PARAMS = {VehicleClass.CAV: CAV, VehicleClass.CAT: CAT}


class Lane(enum.IntEnum):
    INNER = 0
    OUTER = 1
    ACCEL = 2
    RAMP = 3

    @property
    def track(self) -> int:
        """Longitudinal track id; the ramp and the acceleration lane form one track."""
        return 2 if self >= Lane.ACCEL else int(self)

    @property
    def is_mainline(self) -> bool:
        return self in (Lane.INNER, Lane.OUTER)


class Role(str, enum.Enum):
    RAMP_TARGET = "R"
    COOPERATIVE = "p"
    INNER_LEADER = "q"
    INNER_FOLLOWER = "q+1"
    OUTER_LEADER = "p-1"
    OUTER_FOLLOWER = "p+1"
    BACKGROUND = "background"


@dataclass(frozen=True)
class RoadLayout:
    """Dual-mainline, single-ramp merge geometry and speed limits.

    The corridor spans ``[-upstream_length, downstream_length]`` on the
    mainline; ramp vehicles enter at ``-ramp_length`` and must merge before
    ``accel_lane_length``.
    """

    accel_lane_length: float = 200.0
    upstream_length: float = 1000.0
    downstream_length: float = 500.0
    ramp_length: float = 300.0
    v_lim_min: float = 60.0 / 3.6
    v_lim_max: float = 100.0 / 3.6
    outer_speed: float = 25.0
    inner_speed: float = 25.0
    inner_lane_cav_only: bool = True

    def __post_init__(self):
        if not 0 < self.v_lim_min < self.v_lim_max:
            raise ValueError("need 0 < v_lim_min < v_lim_max")
        if self.accel_lane_length <= 0:
            raise ValueError("accel_lane_length must be positive")
        if self.downstream_length < self.accel_lane_length:
            raise ValueError("corridor must extend past the acceleration lane")
        for s in (self.outer_speed, self.inner_speed):
            if not 0 < s <= self.v_lim_max:
                raise ValueError("lane speeds must lie in (0, v_lim_max]")

    @property
    def L_b(self) -> float:
        return self.accel_lane_length

    @property
    def corridor_length(self) -> float:
        return self.upstream_length + self.downstream_length

    @property
    def ramp_path_length(self) -> float:
        return self.ramp_length + self.downstream_length

    @property
    def mainline_entry(self) -> float:
        return -self.upstream_length

    @property
    def ramp_entry(self) -> float:
        return -self.ramp_length

    @property
    def exit_x(self) -> float:
        return self.downstream_length

    def lane_speed(self, lane: Lane) -> float:
        """Desired (free-flow) speed of a lane."""
        if lane == Lane.INNER:
            return self.inner_speed
        return self.outer_speed

    def admits(self, lane: Lane, vclass: VehicleClass) -> bool:
        return not (lane == Lane.INNER and self.inner_lane_cav_only and vclass == VehicleClass.CAT)


@dataclass
class VehicleState:
    id: int | str
    vclass: VehicleClassParams
    lane: Lane
    x: float
    v: float
    a: float = 0.0
    role: Role = Role.BACKGROUND

    @property
    def length(self) -> float:
        return self.vclass.length

    def with_role(self, role: Role) -> "VehicleState":
        return replace(self, role=role)


def bumper_gap(leader: VehicleState, follower: VehicleState) -> float:
    """Net gap from the follower's front bumper to the leader's rear bumper.

    Negative values mean the bodies overlap.
    """
    return leader.x - follower.x - leader.length


def advance_constant_accel(x: float, v: float, a: float, dt: float) -> tuple[float, float]:
    """Advance one vehicle by ``dt`` under constant acceleration ``a``.

    Braking never reverses the vehicle: if the speed would cross zero the
    vehicle halts after ``v**2 / (2|a|)`` metres and stays put.
    """
    if dt < 0:
        raise ValueError("dt must be non-negative")
    v_end = v + a * dt
    if v_end < 0.0:
        return x + v * v / (-2.0 * a), 0.0
    return x + v * dt + 0.5 * a * dt * dt, v_end


def advance_arrays(x: np.ndarray, v: np.ndarray, a: np.ndarray, dt) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`advance_constant_accel`; ``dt`` may be scalar or array."""
    v_end = v + a * dt
    stop = v_end < 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        x_stop = x + v * v / np.where(stop, -2.0 * a, 1.0)
    x_end = np.where(stop, x_stop, x + v * dt + 0.5 * a * dt * dt)
    return x_end, np.where(stop, 0.0, v_end)


@dataclass(frozen=True)
class Segment:
    t_start: float
    duration: float
    a: float


@dataclass(frozen=True)
class TrajectoryPlan:
    """Piecewise constant-acceleration plan, times relative to plan issue.

    ``lane_changes`` lists ``(t, lane)`` switches; the vehicle occupies the
    new lane from ``t`` on. After the last segment the vehicle holds its
    final speed.
    """

    vehicle_id: int | str
    segments: tuple[Segment, ...] = ()
    lane_changes: tuple[tuple[float, Lane], ...] = ()

    def __post_init__(self):
        t = 0.0
        for seg in self.segments:
            if seg.duration < 0:
                raise ValueError("segment duration must be non-negative")
            if abs(seg.t_start - t) > 1e-9:
                raise ValueError("segments must be contiguous from t=0")
            t = seg.t_start + seg.duration

    @property
    def horizon(self) -> float:
        if not self.segments:
            return 0.0
        last = self.segments[-1]
        return last.t_start + last.duration

    @classmethod
    def from_phases(cls, vehicle_id, phases: Sequence[tuple[float, float]], lane_changes=()) -> "TrajectoryPlan":
        """Build a plan from ``(duration, a)`` pairs, dropping empty phases."""
        segs = []
        t = 0.0
        for duration, a in phases:
            if duration <= 0:
                continue
            segs.append(Segment(t, float(duration), float(a)))
            t += duration
        return cls(vehicle_id, tuple(segs), tuple(lane_changes))

    def accel_at(self, t: float) -> float:
        for seg in self.segments:
            if seg.t_start <= t < seg.t_start + seg.duration:
                return seg.a
        return 0.0

    def lane_at(self, t: float, initial: Lane) -> Lane:
        lane = initial
        for t_lc, new_lane in self.lane_changes:
            if t >= t_lc - 1e-9:
                lane = new_lane
        return lane


def plan_state_at(plan: TrajectoryPlan, x0: float, v0: float, t: float) -> tuple[float, float]:
    """State reached ``t`` seconds after the plan was issued from ``(x0, v0)``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    x, v = x0, v0
    for seg in plan.segments:
        if t <= seg.t_start:
            break
        x, v = advance_constant_accel(x, v, seg.a, min(t, seg.t_start + seg.duration) - seg.t_start)
    if t > plan.horizon:
        x += v * (t - plan.horizon)
    return x, v


@dataclass
class CompiledPlan:
    """A plan bound to its initial state, with cached segment boundary states.

    Used by the engine (scalar look-ups every step) and by plan validation
    (vectorised sampling).
    """

    plan: TrajectoryPlan
    t0: float
    x0: float
    v0: float
    lane0: Lane
    starts: np.ndarray = field(init=False, repr=False)
    xs: np.ndarray = field(init=False, repr=False)
    vs: np.ndarray = field(init=False, repr=False)
    accs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        starts, xs, vs, accs = [0.0], [self.x0], [self.v0], []
        x, v = self.x0, self.v0
        for seg in self.plan.segments:
            x, v = advance_constant_accel(x, v, seg.a, seg.duration)
            accs.append(seg.a)
            starts.append(seg.t_start + seg.duration)
            xs.append(x)
            vs.append(v)
        accs.append(0.0)
        self.starts = np.asarray(starts)
        self.xs = np.asarray(xs)
        self.vs = np.asarray(vs)
        self.accs = np.asarray(accs)
        self._starts_list = starts
        self._lc_times = [t for t, _ in self.plan.lane_changes]

    @property
    def t_end(self) -> float:
        return self.t0 + self.plan.horizon

    def state_at(self, t_abs: float) -> tuple[float, float]:
        tau = max(t_abs - self.t0, 0.0)
        k = bisect.bisect_right(self._starts_list, tau) - 1
        return advance_constant_accel(self.xs[k], self.vs[k], self.accs[k], tau - self._starts_list[k])

    def sample(self, t_abs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        tau = np.maximum(np.asarray(t_abs, dtype=float) - self.t0, 0.0)
        k = np.searchsorted(self.starts, tau, side="right") - 1
        return advance_arrays(self.xs[k], self.vs[k], self.accs[k], tau - self.starts[k])

    def lane_at(self, t_abs: float) -> Lane:
        return self.plan.lane_at(t_abs - self.t0, self.lane0)

    def lanes(self, t_abs: np.ndarray) -> np.ndarray:
        tau = np.asarray(t_abs, dtype=float) - self.t0
        out = np.full(tau.shape, int(self.lane0), dtype=np.int8)
        for t_lc, lane in self.plan.lane_changes:
            out[tau >= t_lc - 1e-9] = int(lane)
        return out
