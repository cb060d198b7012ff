"""Closed-form kinematic solvers for the cooperative merging strategies.

Every solver returns the least-effort admissible value (minimal deceleration
or acceleration for a helper vehicle, maximal acceleration for the ramp
vehicle) and raises :class:`InfeasibleCase` when no admissible value exists.
Positions follow the package convention: front bumpers on a signed axis with
``x = 0`` at the acceleration-lane start. Lane-change solvers accept the
distances ``S = -x`` instead, mirroring how the cases are usually stated.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from ..core import RoadLayout
from ..errors import InfeasibleCase, MergeBeyondLaneEnd, SpeedWindowViolation
from ..safety import SafetyParams, accel_time_window

_EPS = 1e-9


class LaneChangeCase(str, enum.Enum):
    DIRECT = "DirectLaneChange"
    FOLLOWER_DECEL = "LaneChangeFollowerDecel"
    LEADER_ACCEL = "LaneChangeLeaderAccel"
    NO_LANE_CHANGE = "MainlineCoopAccel"


def classify_lane_change_case(S_f: float, S_b: float, S_safe: float) -> LaneChangeCase:
    """Pick the lane-change sub-case from the inner-lane gaps around ``p``.

    Args:
        S_f: Gap from ``p`` to the inner-lane vehicle ahead (``q``).
        S_b: Gap from the inner-lane vehicle behind (``q+1``) to ``p``.
        S_safe: Safe spacing.
    """
    front_ok = S_f >= S_safe
    back_ok = S_b >= S_safe
    if front_ok and back_ok:
        return LaneChangeCase.DIRECT
    if front_ok:
        return LaneChangeCase.FOLLOWER_DECEL
    if back_ok:
        return LaneChangeCase.LEADER_ACCEL
    return LaneChangeCase.NO_LANE_CHANGE


def min_decel_for_displacement(v: float, t: float, d_max: float, decel_max: float) -> float:
    """Smallest braking magnitude that keeps the distance covered in ``t`` within ``d_max``.

    Braking stops at standstill, so when the linear bound would reverse the
    vehicle the stopping-distance form ``v**2 / (2 d_max)`` applies instead.

    Raises:
        InfeasibleCase: the demand exceeds ``decel_max`` or cannot be met at all.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if v * t <= d_max + _EPS:
        return 0.0
    if d_max <= 0:
        raise InfeasibleCase(f"allowed travel {d_max:.3f} m cannot be met from {v:.2f} m/s")
    a = 2.0 * (v * t - d_max) / (t * t)
    if a * t > v:
        a = v * v / (2.0 * d_max)
    if a > decel_max + _EPS:
        raise InfeasibleCase(f"deceleration {a:.3f} exceeds limit {decel_max}")
    return a


def solve_follower_decel(
    S_p: float,
    S_q1: float,
    v_p: float,
    v_q1: float,
    t_q1: float | None,
    safety: SafetyParams,
    L_p: float = 5.0,
    decel_max: float = 4.5,
) -> float:
    """Deceleration of the inner follower ``q+1`` that opens room for ``p``.

    Args:
        S_p: Distance of ``p`` to the acceleration-lane start.
        S_q1: Distance of ``q+1`` to the acceleration-lane start.
        v_p: Speed of ``p`` (held constant).
        v_q1: Speed of ``q+1``.
        t_q1: Cooperation time, ``0 < t_q1 <= S_p / v_p``. ``None`` picks the
            middle of that window.
        safety: Safety budget.
        L_p: Length of ``p``.
        decel_max: Braking limit of ``q+1``.

    Returns:
        Minimal braking magnitude (non-negative).
    """
    if S_p <= 0 or v_p <= 0:
        raise InfeasibleCase("p has already reached the acceleration lane")
    t_hi = S_p / v_p
    t = 0.5 * t_hi if t_q1 is None else t_q1
    if not 0 < t <= t_hi + _EPS:
        raise InfeasibleCase(f"cooperation time {t:.3f} outside (0, {t_hi:.3f}]")
    d_max = S_q1 - S_p + v_p * t - L_p - safety.S_safe
    return min_decel_for_displacement(v_q1, t, d_max, decel_max)


def leader_accel_window(
    S_p: float, S_q1: float, v_p: float, v_q1: float, safety: SafetyParams, L_p: float = 5.0
) -> float:
    """Upper end of the admissible cooperation time when ``q`` pulls ahead.

    The rear gap to ``q+1`` must stay safe until ``p`` switches lanes and the
    switch must happen upstream of the acceleration lane.
    """
    if S_p <= 0 or v_p <= 0:
        raise InfeasibleCase("p has already reached the acceleration lane")
    t_hi = S_p / v_p
    if v_q1 > v_p:
        t_hi = min(t_hi, (S_q1 - S_p - safety.S_safe - L_p) / (v_q1 - v_p))
    if t_hi <= 0:
        raise InfeasibleCase("empty cooperation-time window")
    return t_hi


def solve_leader_accel(
    S_p: float,
    S_q: float,
    S_q1: float,
    v_p: float,
    v_q: float,
    v_q1: float,
    safety: SafetyParams,
    L_q: float = 5.0,
    L_p: float = 5.0,
    a_safe: float = 2.5,
    accel_min: float = 0.0,
    t_q: float | None = None,
) -> tuple[float, float]:
    """Acceleration of the inner leader ``q`` that opens room for ``p``.

    Args:
        S_p, S_q, S_q1: Distances of ``p``, ``q`` and ``q+1`` to the lane start.
        v_p, v_q, v_q1: Their speeds.
        safety: Safety budget.
        L_q: Length of ``q``.
        L_p: Length of ``p``.
        a_safe: Largest acceleration ``q`` may safely use.
        accel_min: Lower bound on any positive command.
        t_q: Cooperation time; ``None`` picks the window midpoint.

    Returns:
        ``(a_accel_q, t_q)``.
    """
    t_hi = leader_accel_window(S_p, S_q1, v_p, v_q1, safety, L_p)
    t = 0.5 * t_hi if t_q is None else t_q
    if not 0 < t <= t_hi + _EPS:
        raise InfeasibleCase(f"cooperation time {t:.3f} outside (0, {t_hi:.3f}]")
    a = max(0.0, 2.0 * (S_q + safety.S_safe + L_q - S_p + (v_p - v_q) * t) / (t * t))
    a = max(a, accel_min)
    if a > a_safe + _EPS:
        raise InfeasibleCase(f"q needs {a:.3f} m/s^2 > a_safe {a_safe:.3f}")
    return a, t


@dataclass(frozen=True)
class GapFix:
    a_p_minus1: float | None = None
    a_decel_p1: float | None = None
    delta_S_lead: float | None = None
    delta_S_follow: float | None = None

    @property
    def empty(self) -> bool:
        return self.a_p_minus1 is None and self.a_decel_p1 is None


def post_lane_change_gap_fix(
    x_R_merge: float,
    L_R: float,
    t_r: float,
    safety: SafetyParams,
    p_minus1: tuple[float, float, float, float] | None = None,
    p_plus1: tuple[float, float, float] | None = None,
    literal: bool = False,
) -> GapFix:
    """Adjust the new outer-lane neighbours of the ramp vehicle after ``p`` leaves.

    The neighbours are projected at constant speed to the merge instant. A
    short lead gap is closed by accelerating ``p-1`` over ``t_r``; a short
    rear gap by braking ``p+1`` over ``t_r``.

    Args:
        x_R_merge: Ramp vehicle position at the merge instant.
        L_R: Ramp vehicle length.
        t_r: Time from now until the merge.
        safety: Safety budget.
        p_minus1: ``(x, v, length, accel_max)`` of the outer leader or ``None``.
        p_plus1: ``(x, v, decel_max)`` of the outer follower or ``None``.
        literal: Use ``a = dS / t_r`` instead of the constant-acceleration
            form ``a = 2 dS / t_r**2``.

    Returns:
        The adjustments that are needed; unset fields need no action.
    """
    if t_r <= 0:
        raise ValueError("t_r must be positive")
    S = safety.S_safe
    out = {}
    if p_minus1 is not None:
        x, v, length, accel_max = p_minus1
        gap = x + v * t_r - x_R_merge - length
        if gap < S:
            dS = S - gap
            a = dS / t_r if literal else 2.0 * dS / (t_r * t_r)
            if a > accel_max + _EPS:
                raise InfeasibleCase(f"p-1 needs {a:.3f} m/s^2 > {accel_max}")
            out.update(a_p_minus1=a, delta_S_lead=dS)
    if p_plus1 is not None:
        x, v, decel_max = p_plus1
        gap = x_R_merge - (x + v * t_r) - L_R
        if gap < S:
            dS = S - gap
            if literal:
                a = dS / t_r
                if a > decel_max + _EPS:
                    raise InfeasibleCase(f"p+1 needs {a:.3f} m/s^2 > {decel_max}")
            else:
                a = min_decel_for_displacement(v, t_r, v * t_r - dS, decel_max)
            out.update(a_decel_p1=a, delta_S_follow=dS)
    return GapFix(**out)


def coop_accel_bound(
    x_R_merge: float, t_r: float, x_p: float, v_p: float, L_p: float, S_safe: float
) -> float:
    """Raw lower bound on the acceleration of ``p`` so it leads the ramp vehicle safely.

    May be negative, meaning ``p`` is already far enough ahead.
    """
    return 2.0 * (x_R_merge + S_safe + L_p - x_p - v_p * t_r) / (t_r * t_r)


def rear_accel_time_blocked(
    x_R: float, v0: float, a_r: float, x_p1: float, v_p1: float, L_R: float, S_safe: float
) -> tuple[float, float] | None:
    """Open interval of acceleration durations that leave ``p+1`` too close.

    ``p+1`` holds its speed. The gap at the merge instant is a quadratic in
    the acceleration duration opening upwards, so the unsafe durations lie
    strictly between its roots. ``None`` when every duration is safe.
    """
    t_n = -x_R / v0
    dv = v0 - v_p1
    C = x_p1 + L_R + S_safe + v_p1 * t_n
    disc = dv * dv + 2.0 * a_r * C
    if disc <= 0:
        return None
    root = math.sqrt(disc)
    lo, hi = (-root - dv) / a_r, (root - dv) / a_r
    if hi <= 0:
        return None
    return lo, hi


@dataclass(frozen=True)
class CoopAccelResult:
    t_normal: float
    t_accel: float
    t_r: float
    a_accel_p: float
    v_merge: float
    x_merge: float
    iterations: int


def solve_coop_accel(
    x_R: float,
    v0: float,
    a_r: float,
    x_p: float,
    v_p: float,
    layout: RoadLayout,
    safety: SafetyParams,
    L_p: float = 5.0,
    L_R: float = 7.0,
    accel_max_p: float = 2.5,
    p_plus1: tuple[float, float] | None = None,
    tol: float = 1e-4,
    max_iter: int = 100,
) -> CoopAccelResult:
    """Accelerate ``p`` so the ramp vehicle can slot in directly behind it.

    The ramp vehicle cruises at ``v0`` to the lane start and then accelerates
    at ``a_r``. Its acceleration duration respects the lane window and the
    rear gap to ``p+1`` (``(x, v)``, held at constant speed). ``p`` uses the
    least acceleration that leaves a safe gap ahead of the ramp vehicle and
    lets both reach the same merge speed; the merge speed and ``p``'s
    acceleration are iterated to a common fixed point.

    Raises:
        InfeasibleCase: window empty, non-convergence, or a limit violated.
    """
    if x_R > _EPS:
        raise ValueError("ramp vehicle must be upstream of the acceleration lane")
    L_b = layout.L_b
    S = safety.S_safe
    t_lo, t_hi = accel_time_window(v0, a_r, L_b, layout.v_lim_min)
    blocked = None
    if p_plus1 is not None:
        blocked = rear_accel_time_blocked(x_R, v0, a_r, p_plus1[0], p_plus1[1], L_R, S)
    t_n = -x_R / v0
    v_m = v_p
    for it in range(1, max_iter + 1):
        t_acc = max((v_m - v0) / a_r, t_lo)
        # durations inside the blocked interval would squeeze p+1; the next
        # admissible one is the interval's upper end
        if blocked is not None and blocked[0] < t_acc < blocked[1]:
            t_acc = blocked[1]
            if t_acc > t_hi + _EPS:
                raise MergeBeyondLaneEnd(f"rear gap needs t_accel {t_acc:.3f} > {t_hi:.3f}")
        t_r = t_n + t_acc
        v_R = v0 + a_r * t_acc
        x_m = v0 * t_acc + 0.5 * a_r * t_acc * t_acc
        a_p = max(0.0, coop_accel_bound(x_m, t_r, x_p, v_p, L_p, S), (v_R - v_p) / t_r)
        v_new = v_p + a_p * t_r
        if abs(v_new - v_m) < tol:
            break
        v_m = v_new
        if v_m > layout.v_lim_max + 1.0 or (v_m - v0) / a_r > t_hi + 1.0:
            raise InfeasibleCase("merge speed diverges beyond the admissible range")
    else:
        raise InfeasibleCase("merge-speed iteration did not converge")
    if t_acc > t_hi + 1e-6:
        raise MergeBeyondLaneEnd(f"t_accel {t_acc:.3f} > {t_hi:.3f}")
    if v_R > layout.v_lim_max + 1e-6:
        raise SpeedWindowViolation(f"v_merge {v_R:.3f} above limit")
    if a_p > accel_max_p + _EPS:
        raise InfeasibleCase(f"p needs {a_p:.3f} m/s^2 > {accel_max_p}")
    return CoopAccelResult(t_n, t_acc, t_r, a_p, v_R, x_m, it)


@dataclass(frozen=True)
class RampAdjustResult:
    a_ramp: float
    t_normal: float
    t_accel: float
    t_r: float
    v_merge: float
    x_merge: float
    a_decel_p1: float | None
    closed_form_bound: float | None


def ramp_adjust_gap(a: float, x_R: float, v0: float, x_p: float, v_p: float, L_p: float) -> float:
    """Bumper gap from ``p`` to the ramp vehicle at the merge when it accelerates at ``a``."""
    t_n = -x_R / v0
    t_acc = (v_p - v0) / a
    x_m = (v_p * v_p - v0 * v0) / (2.0 * a)
    return x_p + v_p * (t_n + t_acc) - x_m - L_p


def solve_ramp_accel_adjust(
    x_R: float,
    v0: float,
    x_p: float,
    v_p: float,
    layout: RoadLayout,
    safety: SafetyParams,
    L_p: float = 5.0,
    L_R: float = 7.0,
    accel_min: float = 0.0,
    accel_max: float = 1.5,
    p_plus1: tuple[float, float, float] | None = None,
) -> RampAdjustResult:
    """Choose the ramp acceleration so the vehicle merges right behind ``p`` at ``p``'s speed.

    ``p`` holds its speed. The gap from ``p`` shrinks as the ramp vehicle
    accelerates harder, so the admissible accelerations form an interval
    bounded below by the lane length and above by the gap; the largest value
    is taken. ``p+1`` (``(x, v, decel_max)``) brakes if it would otherwise
    be too close at the merge.

    Args:
        L_p: Length of ``p`` (the vehicle the ramp vehicle slots behind).
        L_R: Length of the ramp vehicle.
        accel_min, accel_max: Ramp vehicle acceleration bounds.
    """
    if x_R > _EPS:
        raise ValueError("ramp vehicle must be upstream of the acceleration lane")
    if not layout.v_lim_min - _EPS <= v_p <= layout.v_lim_max + _EPS:
        raise SpeedWindowViolation(f"v_p {v_p:.3f} outside the outer-lane speed window")
    if v_p <= v0 + _EPS:
        raise InfeasibleCase("p is not faster than the ramp cruising speed")
    S = safety.S_safe
    t_n = -x_R / v0
    dv = v_p - v0
    lo = max(accel_min, (v_p * v_p - v0 * v0) / (2.0 * layout.L_b))
    hi = accel_max
    K = x_p + v_p * t_n - L_p - S
    closed = None
    if K < 0:
        closed = dv * dv / (-2.0 * K)
        hi = min(hi, closed)
    if lo > hi + _EPS or hi <= 0:
        if lo > accel_max + _EPS:
            raise MergeBeyondLaneEnd("acceleration lane too short at class acceleration")
        raise InfeasibleCase("empty ramp acceleration interval")
    a = hi
    if ramp_adjust_gap(a, x_R, v0, x_p, v_p, L_p) < S - 1e-6:
        raise InfeasibleCase("direct gap check failed")
    t_acc = dv / a
    t_r = t_n + t_acc
    x_m = (v_p * v_p - v0 * v0) / (2.0 * a)
    a_p1 = None
    if p_plus1 is not None:
        x1, v1, decel_max = p_plus1
        a_p1 = min_decel_for_displacement(v1, t_r, x_m - L_R - S - x1, decel_max)
        if a_p1 == 0.0:
            a_p1 = None
    return RampAdjustResult(a, t_n, t_acc, t_r, v_p, x_m, a_p1, closed)
