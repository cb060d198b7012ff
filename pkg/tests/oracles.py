"""Brute-force kinematic oracles for the closed-form merge solvers.

Each oracle searches a 1e-3 m/s^2 acceleration grid and decides feasibility
of every grid value by integrating the vehicles involved with 1 ms steps,
then checking the gap conditions on the integrated positions. Nothing here
uses the algebraic bounds the solvers are built on.

The search runs coarse-to-fine: every 50th grid value is tested from the
preferred end of the range, and the fine grid is then scanned inside the
coarse cell where feasibility first appears. When no coarse value is
feasible the whole fine grid is scanned, so an infeasible verdict is always
exhaustive.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

H = 1e-3  # integration step (s)
GRID = 1e-3  # acceleration grid (m/s^2)
COARSE = 50
TOL = 1e-6  # slack on integrated gap and position checks (m)


@njit(cache=True)
def drive(x, v, a, T):
    """Position and speed after ``T`` seconds at constant ``a``, in 1 ms steps.

    Braking stops at standstill.
    """
    n = int(T / H)
    rem = T - n * H
    for k in range(n + 1):
        h = H if k < n else rem
        if h <= 0.0:
            break
        if a < 0.0 and v + a * h < 0.0:
            x += v * v / (-2.0 * a)
            v = 0.0
        else:
            x += v * h + 0.5 * a * h * h
            v += a * h
    return x, v


@njit(cache=True)
def drive_capped(x, v, a, T, x_cap):
    """Like :func:`drive` but stops early once ``x`` passes ``x_cap``.

    Returns ``(x, v, passed)``.
    """
    n = int(T / H)
    rem = T - n * H
    for k in range(n + 1):
        h = H if k < n else rem
        if h <= 0.0:
            break
        x += v * h + 0.5 * a * h * h
        v += a * h
        if x > x_cap:
            return x, v, True
    return x, v, False


@njit(cache=True)
def trajectory(x, v, a, T):
    """States at every whole millisecond of ``[0, T]`` (integrated as in :func:`drive`)."""
    n = int(T / H) + 1
    X = np.empty(n + 1)
    V = np.empty(n + 1)
    X[0], V[0] = x, v
    for k in range(n):
        X[k + 1], V[k + 1] = drive(X[k], V[k], a, H)
    return X, V


@njit(cache=True)
def state_at(X, V, a, t):
    """Continue a precomputed trajectory to time ``t`` (inside its span)."""
    k = int(t / H)
    return drive(X[k], V[k], a, t - k * H)


@njit(cache=True)
def _follower_ok(a, S_p, S_q1, v_p, v_q1, t, S_safe, L_p):
    x_p, _ = drive(-S_p, v_p, 0.0, t)
    x_q1, _ = drive(-S_q1, v_q1, -a, t)
    return x_p - L_p - x_q1 >= S_safe - TOL


@njit(cache=True)
def _leader_ok(a, S_p, S_q, v_p, v_q, t, S_safe, L_q):
    x_p, _ = drive(-S_p, v_p, 0.0, t)
    x_q, _ = drive(-S_q, v_q, a, t)
    return x_q - L_q - x_p >= S_safe - TOL


@njit(cache=True)
def _lead_fix_ok(a, x, v, length, x_R, t_r, S_safe):
    xe, _ = drive(x, v, a, t_r)
    return xe - length - x_R >= S_safe - TOL


@njit(cache=True)
def _rear_fix_ok(b, x, v, x_R, L_R, t_r, S_safe):
    xe, _ = drive(x, v, -b, t_r)
    return x_R - L_R - xe >= S_safe - TOL


@njit(cache=True)
def _coop_ok(a_p, x1, v1, t_n, a_r, x_p, v_p, L_b, v_min, v_max, S_safe, L_p, L_R, has_p1, QX, QV):
    # the ramp vehicle (state x1, v1 at the lane start, reached at t_n) must
    # reach p's speed at the merge: pick the acceleration duration that makes
    # both speeds equal
    if a_p >= a_r:
        return False
    t_acc = (v_p + a_p * t_n - v1) / (a_r - a_p)
    if t_acc < 0.0:
        return False
    x_m, v_R, passed = drive_capped(x1, v1, a_r, t_acc, L_b + TOL)
    t_r = t_n + t_acc
    if passed or v_R < v_min - TOL or v_R > v_max + TOL:
        return False
    xp, vp = drive(x_p, v_p, a_p, t_r)
    if abs(vp - v_R) > 1e-6:
        return False
    if xp - L_p - x_m < S_safe - TOL:
        return False
    if has_p1:
        xq, _ = state_at(QX, QV, 0.0, t_r)
        if x_m - L_R - xq < S_safe - TOL:
            return False
    return True


@njit(cache=True)
def _ramp_merge(a, x1, v1, t_n, v_p, x_cap):
    """Merge position and time when accelerating at ``a`` from the lane start.

    Integration is abandoned (position beyond ``x_cap``) once the vehicle
    passes ``x_cap``.
    """
    t_acc = (v_p - v1) / a
    x_m, _, _ = drive_capped(x1, v1, a, t_acc, x_cap)
    return x_m, t_n + t_acc


@njit(cache=True)
def _ramp_ok(a, x1, v1, t_n, PX, PV, v_p, L_b, S_safe, L_p):
    if a <= 0.0:
        return False
    x_m, t_r = _ramp_merge(a, x1, v1, t_n, v_p, L_b + TOL)
    if x_m > L_b + TOL:
        return False
    xp, _ = state_at(PX, PV, 0.0, t_r)
    return xp - L_p - x_m >= S_safe - TOL


def _grid(lo: float, hi: float) -> np.ndarray:
    k0 = math.ceil(lo / GRID - 1e-9)
    k1 = math.floor(hi / GRID + 1e-9)
    return np.arange(k0, k1 + 1) * GRID


def grid_search(ok, lo: float, hi: float, prefer: str = "min"):
    """Extreme grid value in ``[lo, hi]`` accepted by ``ok`` or ``None``."""
    values = _grid(lo, hi)
    if prefer == "max":
        values = values[::-1]
    if values.size == 0:
        return None
    coarse = list(range(0, values.size, COARSE))
    if coarse[-1] != values.size - 1:
        coarse.append(values.size - 1)
    prev = 0
    for c in coarse:
        if ok(values[c]):
            for k in range(prev, c + 1):
                if ok(values[k]):
                    return float(values[k])
        prev = c
    for k in range(values.size):
        if ok(values[k]):
            return float(values[k])
    return None


def follower_decel(S_p, S_q1, v_p, v_q1, t, S_safe, L_p, decel_max):
    """Least braking of ``q+1`` that leaves ``S_safe`` behind ``p`` after ``t``."""
    if not 0 < t <= S_p / v_p + 1e-12:
        return None
    return grid_search(lambda a: _follower_ok(a, S_p, S_q1, v_p, v_q1, t, S_safe, L_p), 0.0, decel_max)


def leader_time_admissible(S_p, S_q1, v_p, v_q1, t, S_safe, L_p):
    """``p`` is still upstream of the lane start and safely ahead of ``q+1`` after ``t``."""
    x_p, _ = drive(-S_p, v_p, 0.0, t)
    if x_p > TOL:
        return False
    x_q1, _ = drive(-S_q1, v_q1, 0.0, t)
    return x_p - L_p - x_q1 >= S_safe - TOL


def leader_accel(S_p, S_q, S_q1, v_p, v_q, v_q1, t, S_safe, L_q, L_p, a_safe, accel_min=0.0):
    """Least acceleration of ``q`` that leaves ``S_safe`` ahead of ``p`` after ``t``.

    ``None`` when ``t`` is not an admissible cooperation time: ``p`` must
    still be upstream of the lane start and ``q+1`` must stay a safe
    distance behind ``p`` throughout.
    """
    if not leader_time_admissible(S_p, S_q1, v_p, v_q1, t, S_safe, L_p):
        return None
    return grid_search(
        lambda a: _leader_ok(a, S_p, S_q, v_p, v_q, t, S_safe, L_q), max(0.0, accel_min), a_safe
    )


def lead_fix(x, v, length, accel_max, x_R, t_r, S_safe):
    """Least acceleration of ``p-1`` giving ``S_safe`` ahead of the ramp vehicle at the merge."""
    return grid_search(lambda a: _lead_fix_ok(a, x, v, length, x_R, t_r, S_safe), 0.0, accel_max)


def rear_fix(x, v, decel_max, x_R, L_R, t_r, S_safe):
    """Least braking of ``p+1`` giving ``S_safe`` behind the ramp vehicle at the merge."""
    return grid_search(lambda b: _rear_fix_ok(b, x, v, x_R, L_R, t_r, S_safe), 0.0, decel_max)


def _to_lane_start(x_R, v0):
    t_n = -x_R / v0
    x1, v1 = drive(x_R, v0, 0.0, t_n)
    return x1, v1, t_n


def coop_checker(x_R, v0, a_r, x_p, v_p, L_b, v_min, v_max, S_safe, L_p, L_R, p_plus1=None):
    """Integrated feasibility test for a candidate acceleration of ``p``."""
    x1, v1, t_n = _to_lane_start(x_R, v0)
    # p+1 holds its speed; the merge happens before the ramp vehicle can
    # cover the lane at its slowest admissible pace
    span = t_n + (v_max - v0) / a_r + L_b / max(v0, 1e-3) + 1.0
    has = p_plus1 is not None
    QX, QV = trajectory(p_plus1[0], p_plus1[1], 0.0, span) if has else (np.zeros(1), np.zeros(1))

    def ok(a):
        return _coop_ok(a, x1, v1, t_n, a_r, x_p, v_p, L_b, v_min, v_max, S_safe, L_p, L_R, has, QX, QV)

    return ok


def coop_accel(x_R, v0, a_r, x_p, v_p, L_b, v_min, v_max, S_safe, L_p, L_R, accel_max_p, p_plus1=None):
    """Least acceleration of ``p`` that yields a speed-matched, safely spaced merge."""
    ok = coop_checker(x_R, v0, a_r, x_p, v_p, L_b, v_min, v_max, S_safe, L_p, L_R, p_plus1)
    return grid_search(ok, 0.0, accel_max_p)


def ramp_checker(x_R, v0, x_p, v_p, L_b, S_safe, L_p):
    """Integrated feasibility test for a candidate ramp acceleration."""
    x1, v1, t_n = _to_lane_start(x_R, v0)
    # a merge inside the lane takes at most L_b / v0 after the lane start
    PX, PV = trajectory(x_p, v_p, 0.0, t_n + L_b / v0 + 1.0)

    def ok(a):
        return _ramp_ok(a, x1, v1, t_n, PX, PV, v_p, L_b, S_safe, L_p)

    return ok


def ramp_merge_state(a, x_R, v0, v_p):
    """Merge position and time of the ramp vehicle accelerating at ``a``."""
    x1, v1, t_n = _to_lane_start(x_R, v0)
    return _ramp_merge(a, x1, v1, t_n, v_p, np.inf)


def ramp_adjust(x_R, v0, x_p, v_p, L_b, v_min, v_max, S_safe, L_p, L_R, accel_min, accel_max, p_plus1=None):
    """Largest ramp acceleration merging behind ``p`` at ``p``'s speed.

    Returns ``(a_ramp, b_p1)`` with ``b_p1`` the least braking of ``p+1``
    (0 when none is needed), or ``None`` when no admissible pair exists.
    """
    if not v_min - 1e-9 <= v_p <= v_max + 1e-9 or v_p <= v0:
        return None
    ok = ramp_checker(x_R, v0, x_p, v_p, L_b, S_safe, L_p)
    a = grid_search(ok, accel_min, accel_max, prefer="max")
    if a is None:
        return None
    if p_plus1 is None:
        return a, 0.0
    x_m, t_r = ramp_merge_state(a, x_R, v0, v_p)
    x1, v1, decel_max = p_plus1
    b = rear_fix(x1, v1, decel_max, x_m, L_R, t_r, S_safe)
    if b is None:
        return None
    return a, b
