"""Uncontrolled comparison traffic: IDM car following and a reduced LC2013 lane change.

The scalar cores are compiled with numba so the simulation kernel can call
them directly; the public functions wrap them for use on
:class:`~coopmerge.core.VehicleState` snapshots.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

from numba import njit

from .core import Lane, RoadLayout, VehicleClassParams, VehicleState, bumper_gap

INF = math.inf


@dataclass(frozen=True)
class IdmParams:
    """Intelligent Driver Model parameters.

    ``b`` doubles as the braking clamp; it defaults to the class maximum
    deceleration because no separate comfortable value is given.
    """

    s0: float = 2.0
    T: float = 1.0
    a: float = 2.5
    b: float = 4.5
    delta: float = 4.0
    v_des: float = 25.0

    @classmethod
    def for_class(cls, vclass: VehicleClassParams, v_des: float, s0: float = 2.0, T: float = 1.0) -> "IdmParams":
        return cls(s0=s0, T=T, a=vclass.accel_max, b=vclass.decel_max, v_des=v_des)

    def with_speed(self, v_des: float) -> "IdmParams":
        return replace(self, v_des=v_des)


@dataclass(frozen=True)
class LaneChangeParams:
    """Reduced LC2013 weights and thresholds.

    ``safety_decel_limit=None`` uses each vehicle's class maximum
    deceleration. The cooperative weight scales how much braking a target
    follower accepts; the speed-gain weight scales the incentive.
    """

    strategic_weight: float = 1.0
    cooperative_weight: float = 1.0
    speedgain_weight: float = 1.0
    safety_decel_limit: float | None = None
    gain_threshold: float = 0.1
    cooldown: float = 3.0


@njit(cache=True)
def idm_raw(v, v_lead, gap, s0, T, a, b, delta, v_des):
    """Unclamped IDM acceleration; ``gap=inf`` means no leader."""
    free = 1.0 - (v / v_des) ** delta
    if gap == INF:
        return a * free
    s_star = s0 + max(0.0, v * T + v * (v - v_lead) / (2.0 * math.sqrt(a * b)))
    return a * (free - (s_star / gap) ** 2)


@njit(cache=True)
def idm_clamped(v, v_lead, gap, s0, T, a, b, delta, v_des):
    if gap <= 0.0:
        return -b
    acc = idm_raw(v, v_lead, gap, s0, T, a, b, delta, v_des)
    if acc < -b:
        return -b
    if acc > a:
        return a
    return acc


@njit(cache=True)
def lc_core(
    v,
    v_des,
    a_max,
    b_max,
    limit_self,
    gap_cur,
    v_cur_lead,
    gap_tl,
    v_tl,
    gap_tf,
    v_tf,
    tf_a,
    tf_b,
    tf_vdes,
    limit_tf,
    has_tf,
    s0,
    T,
    delta,
    coop_w,
    gain_w,
    threshold,
    mandatory,
):
    """Return True when a lane change is both safe and (unless mandatory) worthwhile.

    Gaps are bumper gaps; ``inf`` marks a missing neighbour. ``limit_*`` are
    positive deceleration magnitudes the subject and target follower accept.
    """
    if gap_tl < s0:
        return False
    if has_tf and gap_tf < s0:
        return False
    a_new = idm_raw(v, v_tl, gap_tl, s0, T, a_max, b_max, delta, v_des)
    if a_new < -limit_self:
        return False
    if has_tf:
        a_tf = idm_raw(v_tf, v, gap_tf, s0, T, tf_a, tf_b, delta, tf_vdes)
        if a_tf < -limit_tf * coop_w:
            return False
    if mandatory:
        return True
    a_old = idm_raw(v, v_cur_lead, gap_cur, s0, T, a_max, b_max, delta, v_des)
    return gain_w * (min(a_new, a_max) - min(a_old, a_max)) > threshold


def idm_acceleration(v: float, v_leader: float, gap: float, p: IdmParams) -> float:
    """IDM acceleration clamped to ``[-b, a]``.

    Args:
        v: Own speed.
        v_leader: Leader speed (ignored when ``gap`` is infinite).
        gap: Bumper gap to the leader; ``math.inf`` when there is none.
        p: Model parameters.

    Returns:
        The acceleration. A non-positive gap returns full braking ``-b``;
        callers treat that as an emergency.
    """
    return float(idm_clamped(v, v_leader, gap, p.s0, p.T, p.a, p.b, p.delta, p.v_des))


class LaneChange(str, enum.Enum):
    STAY = "Stay"
    CHANGE = "ChangeLane"


def _gap(leader, follower):
    return INF if leader is None or follower is None else bumper_gap(leader, follower)


def lane_change_decision(
    subject: VehicleState,
    cur_leader: VehicleState | None,
    cur_follower: VehicleState | None,
    target_leader: VehicleState | None,
    target_follower: VehicleState | None,
    p: LaneChangeParams,
    target_lane: Lane | None = None,
    layout: RoadLayout | None = None,
    s0: float = 2.0,
    T: float = 1.0,
    mandatory: bool | None = None,
) -> LaneChange:
    """Gap-acceptance decision for one vehicle.

    Safety needs both new gaps of at least ``s0`` and IDM decelerations of
    the subject and the new follower within their limits. The incentive is
    the weighted IDM acceleration gain. A vehicle on the acceleration lane
    is on a mandatory merge and skips the incentive.

    ``cur_follower`` is accepted for symmetry with LC2013 but the reduced
    model does not weigh the old follower's advantage.
    """
    layout = layout or RoadLayout()
    if target_lane is None:
        target_lane = Lane.OUTER if subject.lane != Lane.OUTER else Lane.INNER
    if not layout.admits(target_lane, subject.vclass.vclass):
        return LaneChange.STAY
    if mandatory is None:
        mandatory = subject.lane == Lane.ACCEL
    v_des = layout.lane_speed(target_lane)
    lim_self = p.safety_decel_limit or subject.vclass.decel_max
    tf = target_follower
    tf_cls = tf.vclass if tf is not None else subject.vclass
    lim_tf = p.safety_decel_limit or tf_cls.decel_max
    ok = lc_core(
        subject.v,
        v_des,
        subject.vclass.accel_max,
        subject.vclass.decel_max,
        lim_self,
        _gap(cur_leader, subject),
        cur_leader.v if cur_leader is not None else 0.0,
        _gap(target_leader, subject),
        target_leader.v if target_leader is not None else 0.0,
        _gap(subject, tf),
        tf.v if tf is not None else 0.0,
        tf_cls.accel_max,
        tf_cls.decel_max,
        layout.lane_speed(target_lane),
        lim_tf,
        tf is not None,
        s0,
        T,
        4.0,
        p.cooperative_weight,
        p.speedgain_weight,
        p.gain_threshold,
        mandatory,
    )
    return LaneChange.CHANGE if ok else LaneChange.STAY


@dataclass(frozen=True)
class RampAction:
    a: float
    merge: bool
    forced_stop: bool


def uncontrolled_ramp_behavior(
    R: VehicleState,
    ramp_leader: VehicleState | None,
    outer_leader: VehicleState | None,
    outer_follower: VehicleState | None,
    layout: RoadLayout | None = None,
    ramp_speed: float = 60.0 / 3.6,
    lc: LaneChangeParams | None = None,
    s0: float = 2.0,
    T: float = 1.0,
) -> RampAction:
    """One decision step of an uncontrolled ramp vehicle.

    On the ramp it follows IDM toward ``ramp_speed``. On the acceleration
    lane it targets the outer-lane speed while treating the lane end as a
    standing obstacle, and tries a mandatory merge.
    """
    layout = layout or RoadLayout()
    lc = lc or LaneChangeParams()
    cls = R.vclass
    if R.lane == Lane.RAMP:
        gap = _gap(ramp_leader, R)
        vl = ramp_leader.v if ramp_leader is not None else 0.0
        a = idm_clamped(R.v, vl, gap, s0, T, cls.accel_max, cls.decel_max, 4.0, ramp_speed)
        return RampAction(float(a), False, False)
    if R.lane != Lane.ACCEL:
        raise ValueError("R must be on the ramp or the acceleration lane")
    v_des = layout.outer_speed
    wall_gap = layout.L_b - R.x
    a = idm_clamped(R.v, 0.0, wall_gap, s0, T, cls.accel_max, cls.decel_max, 4.0, v_des)
    if ramp_leader is not None:
        a = min(a, idm_clamped(R.v, ramp_leader.v, _gap(ramp_leader, R), s0, T, cls.accel_max, cls.decel_max, 4.0, v_des))
    decision = lane_change_decision(
        R, ramp_leader, None, outer_leader, outer_follower, lc, Lane.OUTER, layout, s0, T, mandatory=True
    )
    merge = decision == LaneChange.CHANGE
    forced = (not merge) and R.v < 0.1 and wall_gap < s0 + 1.0
    return RampAction(float(a), merge, forced)

