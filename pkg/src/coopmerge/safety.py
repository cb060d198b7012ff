"""Safety spacing budget and arrival-time primitives for the ramp vehicle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import EmptyWindow, MergeBeyondLaneEnd, SpeedWindowViolation

# Feasibility comparisons tolerate this much floating-point slack so that
# boundary cases such as x_merge == L_b stay feasible.
_EPS = 1e-9


def safe_spacing(L_pos: float, L_trk: float) -> float:
    """Safe spacing that absorbs positioning and tracking error on both vehicles.

    Args:
        L_pos: Positioning error in metres.
        L_trk: Trajectory tracking error in metres.

    Returns:
        The spacing ``2 * (L_pos + L_trk)``.
    """
    if L_pos < 0 or L_trk < 0:
        raise ValueError("error budgets must be non-negative")
    return 2.0 * (L_pos + L_trk)


def min_merge_gap(S_safe: float, L_v: float) -> float:
    """Gap two mainline vehicles must leave for a merging vehicle of length ``L_v``."""
    if S_safe < 0 or L_v < 0:
        raise ValueError("inputs must be non-negative")
    return 2.0 * S_safe + L_v


@dataclass(frozen=True)
class SafetyParams:
    """Error budget and the derived safe spacing.

    ``sync_error`` is kept for the record only; at a few nanoseconds it is
    negligible next to the spatial terms.
    """

    L_pos: float = 0.02
    L_trk: float = 0.6
    sync_error: float = 3e-9
    S_safe: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "S_safe", safe_spacing(self.L_pos, self.L_trk))

    def merge_gap(self, L_v: float) -> float:
        return min_merge_gap(self.S_safe, L_v)


def ramp_arrival_time(
    x_R: float,
    v0: float,
    a_r: float,
    v_merge: float,
    L_b: float = 200.0,
    speed_window: tuple[float, float] | None = None,
) -> tuple[float, float, float, float]:
    """Timing of a ramp vehicle that cruises to the lane start then accelerates.

    Args:
        x_R: Current front-bumper position (at or upstream of 0).
        v0: Constant ramp cruising speed.
        a_r: Acceleration used on the acceleration lane.
        v_merge: Speed at which the vehicle enters the outer lane.
        L_b: Acceleration lane length.
        speed_window: Optional ``(v_lim_min, v_lim_max)`` that ``v_merge``
            must respect. ``None`` skips the check.

    Returns:
        ``(t_normal, t_accel, t_r, x_merge)`` where ``x_merge`` is the
        position on the acceleration lane where ``v_merge`` is reached.

    Raises:
        MergeBeyondLaneEnd: ``x_merge`` lies past ``L_b``.
        SpeedWindowViolation: ``v_merge`` outside ``speed_window``.
    """
    if v0 <= 0 or a_r <= 0:
        raise ValueError("v0 and a_r must be positive")
    if x_R > _EPS:
        raise ValueError("x_R must not lie past the acceleration-lane start")
    if v_merge < v0 - _EPS:
        raise ValueError("v_merge must be at least v0")
    if speed_window is not None:
        lo, hi = speed_window
        if not lo - _EPS <= v_merge <= hi + _EPS:
            raise SpeedWindowViolation(f"v_merge={v_merge:.3f} outside [{lo:.3f}, {hi:.3f}]")
    t_normal = abs(x_R) / v0
    t_accel = max(v_merge - v0, 0.0) / a_r
    x_merge = v0 * t_accel + 0.5 * a_r * t_accel * t_accel
    if x_merge > L_b + 1e-6:
        raise MergeBeyondLaneEnd(f"x_merge={x_merge:.3f} > L_b={L_b}")
    return t_normal, t_accel, t_normal + t_accel, x_merge


def accel_time_window(v0: float, a_r: float, L_b: float, v_lim_min: float) -> tuple[float, float]:
    """Admissible acceleration durations on the acceleration lane.

    The lower bound is the time to reach the outer-lane minimum speed
    (zero if already there); the upper bound is the time to use up the lane.

    Raises:
        EmptyWindow: the lower bound exceeds the upper bound.
    """
    if a_r <= 0:
        raise ValueError("a_r must be positive")
    if v0 < 0 or L_b <= 0:
        raise ValueError("need v0 >= 0 and L_b > 0")
    t_lo = max((v_lim_min - v0) / a_r, 0.0)
    t_hi = (math.sqrt(v0 * v0 + 2.0 * a_r * L_b) - v0) / a_r
    if t_lo > t_hi + _EPS:
        raise EmptyWindow(f"t_lo={t_lo:.3f} > t_hi={t_hi:.3f}")
    return t_lo, t_hi
