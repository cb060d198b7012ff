"""Compiled inner loop of the simulator.

The world lives in flat numpy arrays so that whole stretches of simulated
time run inside one compiled call. The loop hands control back to Python
only when the merge planner must run or an output buffer needs to grow.

Column layouts are fixed by the constants below and shared with
:mod:`coopmerge.sim.engine`.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from ..baseline import idm_clamped, lc_core

# float state columns
FX, FV, FA, FLEN, FAMAX, FDMAX, FOFF, FLCT, FPT0, FPEND, FNEXT = range(11)
NF = 11
# int state columns
IACT, IVID, ICLS, ILANE, IPLAN, INSEG, INLC, IFLAG, ICOLL, ICONF, ICONFW, IYIELD = range(12)
NI = 12
MAXSEG = 8
MAXLC = 3
LEAVE_STEPS = 50  # look-ahead for a planned lane change that clears a braking leader
# plan segment columns
SSTART, SX, SV, SA = range(4)

# parameter vector
(
    P_DT,
    P_S0,
    P_T,
    P_DELTA,
    P_VIN,
    P_VOUT,
    P_VRAMP,
    P_LB,
    P_XEXIT,
    P_XMAIN,
    P_XRAMP,
    P_SSAFE,
    P_KV,
    P_KP,
    P_KD,
    P_H,
    P_POS,
    P_TRK,
    P_INJ,
    P_MODE,
    P_COOPW,
    P_GAINW,
    P_THR,
    P_COOL,
    P_SDL,
    P_REPLAN,
    P_VMAX,
) = range(27)
NP = 27

# counters
C_TRACE, C_EV, C_VID, C_NACT = range(4)

# lanes
INNER, OUTER, ACCEL, RAMP = 0, 1, 2, 3

# event types
EV_LANE_CHANGE = 1
EV_MERGE = 2
EV_FORCED_STOP = 3
EV_CONFLICT = 4
EV_COLLISION = 5
EV_EMERGENCY_BRAKE = 6
EV_PLAN_BREAK = 7
EV_PLAN_DONE = 8

# status codes
ST_DONE, ST_PLAN, ST_TRACE_FULL, ST_EV_FULL, ST_NO_SLOT = range(5)

# how far behind a merger an outer vehicle may be asked to yield
YIELD_RANGE = 150.0

FLAG_STOP = 1
FLAG_EBRAKE = 2


@njit(cache=True)
def _next_uniform(rng):
    # splitmix64 step; returns a float in [0, 1)
    rng[0] += np.uint64(0x9E3779B97F4A7C15)
    z = rng[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return float(z >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def _advance(x, v, a, dt):
    v1 = v + a * dt
    if v1 < 0.0:
        return x + v * v / (-2.0 * a), 0.0
    return x + v * dt + 0.5 * a * dt * dt, v1


@njit(cache=True)
def _track(lane):
    return 2 if lane >= ACCEL else lane


@njit(cache=True)
def _plan_eval(PS, i, nseg, tau):
    """Plan state and acceleration ``tau`` seconds after issue."""
    k = 0
    while k + 1 < nseg + 1 and PS[i, k + 1, SSTART] <= tau:
        k += 1
    if k > nseg:
        k = nseg
    x, v = _advance(PS[i, k, SX], PS[i, k, SV], PS[i, k, SA], tau - PS[i, k, SSTART])
    return x, v, PS[i, k, SA]


@njit(cache=True)
def _plan_lane(PL, i, nlc, lane0, tau):
    lane = lane0
    for k in range(nlc):
        if tau >= PL[i, k, 0] - 1e-9:
            lane = int(PL[i, k, 1])
    return lane


@njit(cache=True)
def _ordering(F, I, X):
    C = F.shape[0]
    n = 0
    for i in range(C):
        if I[i, IACT] == 1:
            n += 1
    idx = np.empty(n, np.int64)
    key = np.empty(n)
    m = 0
    for i in range(C):
        if I[i, IACT] == 1:
            idx[m] = i
            key[m] = _track(I[i, ILANE]) * 1e7 + X[i]
            m += 1
    perm = np.argsort(key, kind="mergesort")
    order = idx[perm]
    # starts[tr] is the first position whose track is >= tr
    starts = np.full(4, n, np.int64)
    for m in range(n - 1, -1, -1):
        tr = _track(I[order[m], ILANE])
        for u in range(tr + 1):
            starts[u] = m
    return order, starts


@njit(cache=True)
def _neighbors_in_track(order, starts, tr, x, X, skip):
    """Closest vehicles ahead (``x_j >= x``) and behind on track ``tr``."""
    lo = starts[tr]
    hi = starts[tr + 1]
    lead = -1
    foll = -1
    for m in range(lo, hi):
        j = order[m]
        if j == skip:
            continue
        if X[j] >= x:
            lead = j
            break
        foll = j
    return lead, foll


@njit(cache=True)
def _scan_neighbors(F, I, tr, x, X, skip):
    """Linear-scan version used after positions changed within a step."""
    C = F.shape[0]
    lead = -1
    foll = -1
    for j in range(C):
        if I[j, IACT] != 1 or j == skip or _track(I[j, ILANE]) != tr:
            continue
        if X[j] >= x:
            if lead < 0 or X[j] < X[lead]:
                lead = j
        else:
            if foll < 0 or X[j] > X[foll]:
                foll = j
    return lead, foll


@njit(cache=True)
def _log(ev_f, ev_i, ctr, t, typ, vid, other, value, extra):
    e = ctr[C_EV]
    ev_f[e, 0] = t
    ev_f[e, 1] = value
    ev_i[e, 0] = typ
    ev_i[e, 1] = vid
    ev_i[e, 2] = other
    ev_i[e, 3] = extra
    ctr[C_EV] = e + 1
    return e


@njit(cache=True)
def _lane_speed(P, lane):
    if lane == INNER:
        return P[P_VIN]
    if lane == RAMP:
        return P[P_VRAMP]
    return P[P_VOUT]


@njit(cache=True)
def _safe_speed(v_lead, gap, margin, d_self, d_lead, tau):
    """Largest speed from which the follower can still stop ``margin`` behind
    a leader that brakes at ``d_lead``, reacting after ``tau``."""
    room = 2.0 * d_self * (gap - margin) + v_lead * v_lead * d_self / d_lead
    disc = d_self * d_self * tau * tau + room
    if disc <= 0.0:
        return 0.0
    return max(0.0, -d_self * tau + math.sqrt(disc))


@njit(cache=True)
def _stop_accel(gap, v, v_lead, a_lead, d_self, d_lead, margin, dt):
    """Largest acceleration for the coming step after which the follower can
    still stop ``margin`` behind the leader's stopping point.

    The leader's acceleration over the step is known (connected vehicles
    share it) and the leader is assumed to brake at ``d_lead`` afterwards.
    """
    if a_lead < 0.0 and v_lead + a_lead * dt < 0.0:
        dx_l = -v_lead * v_lead / (2.0 * a_lead)
        v_l1 = 0.0
    else:
        dx_l = v_lead * dt + 0.5 * a_lead * dt * dt
        v_l1 = v_lead + a_lead * dt
    room = gap + dx_l + v_l1 * v_l1 / (2.0 * d_lead) - margin
    # the follower covers (v + v1) dt / 2 during the step and v1^2 / 2d after
    b = 0.5 * dt
    disc = b * b - 2.0 * (0.5 * v * dt - room) / d_self
    if disc < 0.0:
        return -v / dt
    v1 = d_self * (-b + math.sqrt(disc))
    if v1 < 0.0:
        v1 = 0.0
    return (v1 - v) / dt


@njit(cache=True)
def _leaves_first(PS, PL, I, i, tau, lane, gap, v_lead, d_lead, margin, dt):
    """Whether plan ``i`` changes lane before it could close on a leader that
    starts braking fully now."""
    nlc = I[i, INLC]
    lane0 = int(PL[i, MAXLC, 0])
    x0, _, _ = _plan_eval(PS, i, I[i, INSEG], tau)
    t_stop = v_lead / d_lead
    for k in range(1, LEAVE_STEPS + 1):
        h = k * dt
        xk, _, _ = _plan_eval(PS, i, I[i, INSEG], tau + h)
        hl = h if h < t_stop else t_stop
        if _plan_lane(PL, i, nlc, lane0, tau + h) != lane:
            return True
        if gap + v_lead * hl - 0.5 * d_lead * hl * hl - (xk - x0) < margin:
            return False
    return False


@njit(cache=True)
def _law(P, v, v_des, amax, dmax, has_lead, gap, v_lead, a_lead, d_lead):
    a = P[P_KV] * (v_des - v)
    if has_lead:
        af = a_lead + P[P_KP] * (gap - P[P_SSAFE] - P[P_H] * v) + P[P_KD] * (v_lead - v)
        if af < a:
            a = af
        # braking-distance backstop: the spring alone is blind to stopped
        # obstacles. The leader's acceleration for this step is shared, and a
        # connected leader is assumed to brake no harder than the follower
        # can; a released plan leaves exactly S_safe, which must not read as
        # an emergency at equal speeds
        d_eff = d_lead if d_lead < dmax else dmax
        ab = _stop_accel(gap, v, v_lead, a_lead, dmax, d_eff, 0.5 * P[P_SSAFE], P[P_DT])
        if ab < a:
            a = ab
    if a > amax:
        a = amax
    if a < -dmax:
        a = -dmax
    return a


@njit(cache=True)
def _idm(P, v, v_des, amax, dmax, has_lead, gap, v_lead):
    g = gap if has_lead else math.inf
    return idm_clamped(v, v_lead, g, P[P_S0], P[P_T], amax, dmax, P[P_DELTA], v_des)


@njit(cache=True)
def _follow(P, mode, v, v_des, amax, dmax, gap, v_lead, a_lead, d_lead):
    if mode == 1:
        return _law(P, v, v_des, amax, dmax, True, gap, v_lead, a_lead, d_lead)
    return _idm(P, v, v_des, amax, dmax, True, gap, v_lead)


@njit(cache=True)
def _spawn(t, s, F, I, PS, P, arr_cls, ptr, rec_f, rec_i, ctr):
    C = F.shape[0]
    lane = INNER if s == 0 else (OUTER if s == 1 else RAMP)
    x0 = P[P_XMAIN] if s < 2 else P[P_XRAMP]
    cls = arr_cls[s, ptr[s]]
    length = 5.0 if cls == 0 else 7.0
    tr = _track(lane)
    # nearest vehicle ahead of / overlapping the entry point
    gap = math.inf
    v_lead = 0.0
    for j in range(C):
        if I[j, IACT] != 1 or _track(I[j, ILANE]) != tr:
            continue
        if F[j, FX] >= x0:
            g = F[j, FX] - F[j, FLEN] - x0
            if g < gap:
                gap = g
                v_lead = F[j, FV]
        elif F[j, FX] > x0 - length - P[P_S0]:
            return False
    if gap < P[P_S0]:
        return False
    slot = -1
    for j in range(C):
        if I[j, IACT] == 0:
            slot = j
            break
    if slot < 0:
        return False
    v = _lane_speed(P, lane)
    if gap < 2.0 * v * P[P_T] + P[P_S0] and v_lead < v:
        v = v_lead
    vid = ctr[C_VID]
    ctr[C_VID] = vid + 1
    for c in range(F.shape[1]):
        F[slot, c] = 0.0
    for c in range(I.shape[1]):
        I[slot, c] = 0
    F[slot, FX] = x0
    F[slot, FV] = v
    F[slot, FLEN] = length
    F[slot, FAMAX] = 2.5 if cls == 0 else 1.5
    F[slot, FDMAX] = 4.5 if cls == 0 else 4.0
    F[slot, FLCT] = -1e9
    F[slot, FNEXT] = t if (lane == RAMP and P[P_MODE] == 1.0) else math.inf
    I[slot, IACT] = 1
    I[slot, IVID] = vid
    I[slot, ICLS] = cls
    I[slot, ILANE] = lane
    I[slot, ICOLL] = -1
    I[slot, ICONF] = -1
    I[slot, ICONFW] = -1
    I[slot, IYIELD] = -1
    rec_f[vid, 0] = t
    rec_f[vid, 1] = math.nan
    rec_f[vid, 2] = P[P_VOUT] if lane == RAMP else _lane_speed(P, lane)
    rec_f[vid, 3] = P[P_XEXIT] - x0
    rec_i[vid, 0] = lane
    rec_i[vid, 1] = cls
    rec_i[vid, 2] = 0
    ptr[s] += 1
    ctr[C_NACT] += 1
    return True


@njit(cache=True)
def run_steps(
    k0,
    k1,
    skip_first_spawn,
    F,
    I,
    PS,
    PL,
    P,
    arr_t,
    arr_cls,
    arr_n,
    ptr,
    rec_f,
    rec_i,
    ctr,
    rng,
    tr_k,
    tr_vid,
    tr_cls,
    tr_lane,
    tr_x,
    tr_v,
    tr_a,
    ev_f,
    ev_i,
):
    """Advance steps ``k0 .. k1-1``; return ``(status, k)`` where ``k`` is the next step to run."""
    C = F.shape[0]
    dt = P[P_DT]
    mode = int(P[P_MODE])
    S_safe = P[P_SSAFE]
    X0 = np.empty(C)
    X1 = np.empty(C)
    V1 = np.empty(C)
    A1 = np.empty(C)
    lc_to = np.empty(C, np.int64)
    chg_tr = np.empty(C, np.int64)
    chg_x = np.empty(C)
    for k in range(k0, k1):
        t = k * dt
        if ctr[C_TRACE] + C > tr_k.shape[0]:
            return ST_TRACE_FULL, k
        if ctr[C_EV] + 6 * C + 16 > ev_f.shape[0]:
            return ST_EV_FULL, k
        if not (skip_first_spawn and k == k0):
            for s in range(3):
                if ptr[s] < arr_n[s] and arr_t[s, ptr[s]] <= t + 1e-9:
                    ok = _spawn(t, s, F, I, PS, P, arr_cls, ptr, rec_f, rec_i, ctr)
                    if not ok and ctr[C_NACT] >= C:
                        return ST_NO_SLOT, k
        if mode == 1:
            for i in range(C):
                if (
                    I[i, IACT] == 1
                    and I[i, ILANE] == RAMP
                    and I[i, IPLAN] == 0
                    and F[i, FNEXT] <= t + 1e-9
                ):
                    return ST_PLAN, k

        X = F[:, FX]
        order, starts = _ordering(F, I, X)
        n = order.shape[0]
        lead = np.full(C, -1, np.int64)
        for m in range(n - 1):
            i = order[m]
            j = order[m + 1]
            if _track(I[i, ILANE]) == _track(I[j, ILANE]):
                lead[i] = j

        # cooperative yielding (uncontrolled mode only; connected vehicles keep
        # their predicted motion): for each merger (front-most first),
        # the nearest outer vehicle that can slow behind it comfortably treats
        # it as a virtual leader; closer vehicles pass it
        yield_to = np.full(C, -1, np.int64)
        for m in range(starts[ACCEL + 1] - 1, starts[ACCEL] - 1 if mode == 0 else starts[ACCEL + 1] - 1, -1):
            r = order[m]
            if I[r, IPLAN] == 1 or I[r, ILANE] != ACCEL:
                continue
            x_rear = F[r, FX] - F[r, FLEN]
            for u in range(starts[OUTER + 1] - 1, starts[OUTER] - 1, -1):
                f = order[u]
                if F[f, FX] >= x_rear:
                    continue
                if F[f, FX] < x_rear - YIELD_RANGE:
                    break
                if yield_to[f] >= 0 or I[f, IPLAN] == 1:
                    continue
                a_y = _follow(P, mode, F[f, FV], _lane_speed(P, OUTER), F[f, FAMAX], F[f, FDMAX], x_rear - F[f, FX], F[r, FV], F[r, FA], F[r, FDMAX])
                committed = I[f, IYIELD] == I[r, IVID]
                if committed or a_y >= -P[P_COOPW] * 0.5 * F[f, FDMAX]:
                    yield_to[f] = r
                    break
        for m in range(n):
            i = order[m]
            I[i, IYIELD] = I[yield_to[i], IVID] if yield_to[i] >= 0 else -1

        # accelerations and lane-change intents
        n_chg = 0
        for mm in range(n):
            # connected mode works front to back so every follower sees its
            # leader's acceleration for this step
            m = n - 1 - mm if mode == 1 else mm
            i = order[m]
            lc_to[i] = -1
            lane = I[i, ILANE]
            v = F[i, FV]
            amax = F[i, FAMAX]
            dmax = F[i, FDMAX]
            L = lead[i]
            has_lead = L >= 0
            d_lead = F[L, FDMAX] if has_lead else dmax
            gap = F[L, FX] - F[i, FX] - F[L, FLEN] if has_lead else math.inf
            v_lead = F[L, FV] if has_lead else 0.0
            a_lead = 0.0
            if has_lead:
                # connected leaders are settled first, so their acceleration
                # for this step is known
                a_lead = A1[L] if mode == 1 else F[L, FA]
            if I[i, IPLAN] == 1:
                tau = t - F[i, FPT0]
                xp, vp, ap = _plan_eval(PS, i, I[i, INSEG], tau)
                a_guard = ap
                if has_lead and I[L, IPLAN] == 1:
                    # released plans are mutually consistent, so behind a
                    # planned leader only a tracking drift that eats half the
                    # safe spacing within this step ends the plan
                    if gap + (v_lead - v) * dt + 0.5 * (a_lead - ap) * dt * dt < 0.5 * S_safe:
                        a_guard = -math.inf
                elif has_lead:
                    a_guard = a_lead + P[P_KP] * gap + P[P_KD] * (v_lead - v)
                    # behind an unplanned leader the plan is also abandoned once
                    # following it would leave no room to stop, unless the plan
                    # leaves the lane before it could reach that leader
                    d_eff = d_lead if d_lead < dmax else dmax
                    if ap > _stop_accel(gap, v, v_lead, a_lead, dmax, d_eff, 0.5 * S_safe, dt) + 1e-9:
                        a_guard = -math.inf
                    if a_guard < ap - 1e-9 and _leaves_first(PS, PL, I, i, tau, lane, gap, v_lead, d_lead, 0.5 * S_safe, dt):
                        a_guard = ap
                if has_lead:
                    if a_guard < ap - 1e-9:
                        I[i, IPLAN] = 0
                        F[i, FNEXT] = t + P[P_REPLAN] if lane == RAMP else math.inf
                        _log(ev_f, ev_i, ctr, t, EV_PLAN_BREAK, I[i, IVID], I[L, IVID], gap, 0)
                if I[i, IPLAN] == 1:
                    A1[i] = ap
                    continue
            v_des = P[P_VOUT] if lane == ACCEL else _lane_speed(P, lane)
            y = yield_to[i]
            if mode == 1 and lane != ACCEL:
                a = _law(P, v, v_des, amax, dmax, has_lead, gap, v_lead, a_lead, d_lead)
                if y >= 0:
                    gy = F[y, FX] - F[y, FLEN] - F[i, FX]
                    a = min(a, _law(P, v, v_des, amax, dmax, True, gy, F[y, FV], F[y, FA], F[y, FDMAX]))
                A1[i] = a
                continue
            a = _idm(P, v, v_des, amax, dmax, has_lead, gap, v_lead)
            if y >= 0:
                a = min(a, _idm(P, v, v_des, amax, dmax, True, F[y, FX] - F[y, FLEN] - F[i, FX], F[y, FV]))
            if lane == ACCEL:
                a_wall = _idm(P, v, v_des, amax, dmax, True, P[P_LB] - F[i, FX], 0.0)
                if a_wall < a:
                    a = a_wall
                if mode == 1 and has_lead:
                    # controlled vehicles keep the braking-distance backstop
                    d_eff = d_lead if d_lead < dmax else dmax
                    ab = _stop_accel(gap, v, v_lead, a_lead, dmax, d_eff, 0.5 * S_safe, dt)
                    if ab < a:
                        a = max(ab, -dmax)
            A1[i] = a
            # lane-change intent
            target = -1
            mandatory = False
            if lane == ACCEL:
                target = OUTER
                mandatory = True
            elif mode == 0 and (lane == INNER or lane == OUTER):
                if (
                    t - F[i, FLCT] >= P[P_COOL]
                    and F[i, FX] > P[P_XMAIN] + 50.0
                    and F[i, FX] < P[P_XEXIT] - 50.0
                ):
                    target = OUTER if lane == INNER else INNER
                    if target == INNER and I[i, ICLS] == 1:
                        target = -1
            if target < 0:
                continue
            tl, tf = _neighbors_in_track(order, starts, target, F[i, FX], X, i)
            if mode == 1 and ((tl >= 0 and I[tl, IPLAN] == 1) or (tf >= 0 and I[tf, IPLAN] == 1)):
                # never cut into a released plan
                continue
            gap_tl = F[tl, FX] - F[i, FX] - F[tl, FLEN] if tl >= 0 else math.inf
            v_tl = F[tl, FV] if tl >= 0 else 0.0
            has_tf = tf >= 0
            gap_tf = F[i, FX] - F[tf, FX] - F[i, FLEN] if has_tf else math.inf
            v_tf = F[tf, FV] if has_tf else 0.0
            tf_a = F[tf, FAMAX] if has_tf else amax
            tf_b = F[tf, FDMAX] if has_tf else dmax
            lim_self = P[P_SDL] if P[P_SDL] > 0 else dmax
            lim_tf = P[P_SDL] if P[P_SDL] > 0 else tf_b
            v_des_t = _lane_speed(P, target)
            if mode == 1:
                # connected fallback merge: both new pairs must be able to stop
                # S_safe apart if the one ahead brakes as hard as the one behind
                ok = gap_tl >= S_safe and gap_tf >= S_safe
                if ok and tl >= 0:
                    ok = v <= _safe_speed(v_tl, gap_tl, S_safe, dmax, dmax, dt)
                if ok and has_tf:
                    ok = v_tf <= _safe_speed(v, gap_tf, S_safe, tf_b, tf_b, dt)
                if ok and has_tf and v_tf > v:
                    # and the new follower only has to slow down comfortably
                    ok = (v_tf - v) ** 2 <= tf_b * (gap_tf - S_safe)
            else:
                ok = lc_core(
                    v,
                    v_des_t,
                    amax,
                    dmax,
                    lim_self,
                    gap,
                    v_lead,
                    gap_tl,
                    v_tl,
                    gap_tf,
                    v_tf,
                    tf_a,
                    tf_b,
                    v_des_t,
                    lim_tf,
                    has_tf,
                    P[P_S0],
                    P[P_T],
                    P[P_DELTA],
                    P[P_COOPW],
                    P[P_GAINW],
                    P[P_THR],
                    mandatory,
                )
            if not ok:
                continue
            clash = False
            for c in range(n_chg):
                if chg_tr[c] == target and abs(chg_x[c] - F[i, FX]) < 50.0:
                    clash = True
                    break
            if clash:
                continue
            chg_tr[n_chg] = target
            chg_x[n_chg] = F[i, FX]
            n_chg += 1
            lc_to[i] = target

        # integrate
        t1 = t + dt
        for m in range(n):
            i = order[m]
            X0[i] = F[i, FX]
            if I[i, IPLAN] == 1:
                xp, vp, ap = _plan_eval(PS, i, I[i, INSEG], t1 - F[i, FPT0])
                if P[P_INJ] == 1.0:
                    off = F[i, FOFF] + (2.0 * _next_uniform(rng) - 1.0) * P[P_POS]
                    if off > P[P_TRK]:
                        off = P[P_TRK]
                    if off < -P[P_TRK]:
                        off = -P[P_TRK]
                    F[i, FOFF] = off
                X1[i] = xp + F[i, FOFF]
                V1[i] = vp
            else:
                X1[i], V1[i] = _advance(F[i, FX], F[i, FV], A1[i], dt)
                if I[i, ILANE] == ACCEL and X1[i] > P[P_LB]:
                    X1[i] = P[P_LB]
                    V1[i] = 0.0
        for m in range(n):
            i = order[m]
            A1[i] = (V1[i] - F[i, FV]) / dt
            F[i, FX] = X1[i]
            F[i, FV] = V1[i]
            F[i, FA] = A1[i]

        # lane updates
        X = F[:, FX]
        for m in range(n):
            i = order[m]
            lane = I[i, ILANE]
            new_lane = lane
            planned = I[i, IPLAN] == 1
            if planned:
                new_lane = _plan_lane(PL, i, I[i, INLC], int(PL[i, MAXLC, 0]), t1 - F[i, FPT0])
            elif lc_to[i] >= 0:
                new_lane = lc_to[i]
            if new_lane == lane and lane == RAMP and F[i, FX] >= 0.0:
                new_lane = ACCEL
            if new_lane == lane:
                continue
            tr_new = _track(new_lane)
            if tr_new != _track(lane):
                tl, tf = _scan_neighbors(F, I, tr_new, F[i, FX], X, i)
                g_l = F[tl, FX] - F[i, FX] - F[tl, FLEN] if tl >= 0 else math.inf
                g_f = F[i, FX] - F[tf, FX] - F[i, FLEN] if tf >= 0 else math.inf
                unsafe = g_l < 0.0 or g_f < 0.0
                if planned and not unsafe and lane == ACCEL:
                    # a planned merge is abandoned when an unplanned neighbour
                    # in the target lane leaves no room for a full brake
                    if tl >= 0 and I[tl, IPLAN] == 0:
                        if F[i, FV] > _safe_speed(F[tl, FV], g_l, 0.0, F[i, FDMAX], F[tl, FDMAX], 0.0) + 1e-9:
                            unsafe = True
                    if tf >= 0 and I[tf, IPLAN] == 0:
                        if F[tf, FV] > _safe_speed(F[i, FV], g_f, 0.0, F[tf, FDMAX], F[tf, FDMAX], 0.0) + 1e-9:
                            unsafe = True
                if planned and unsafe:
                    I[i, IPLAN] = 0
                    _log(ev_f, ev_i, ctr, t1, EV_PLAN_BREAK, I[i, IVID], -1, min(g_l, g_f), 1)
                    continue
                other = I[tf, IVID] if tf >= 0 else -1
                if lane == ACCEL:
                    _log(ev_f, ev_i, ctr, t1, EV_MERGE, I[i, IVID], other, min(g_l, g_f), 1 if planned else 0)
                else:
                    _log(ev_f, ev_i, ctr, t1, EV_LANE_CHANGE, I[i, IVID], other, min(g_l, g_f), new_lane)
                F[i, FLCT] = t1
            I[i, ILANE] = new_lane
            if new_lane != RAMP:
                F[i, FNEXT] = math.inf

        # plan completion and exits
        for m in range(n):
            i = order[m]
            if I[i, IPLAN] == 1 and t1 - F[i, FPT0] >= F[i, FPEND] - 1e-9:
                I[i, IPLAN] = 0
                F[i, FOFF] = 0.0
                _log(ev_f, ev_i, ctr, t1, EV_PLAN_DONE, I[i, IVID], -1, 0.0, 0)
            lane = I[i, ILANE]
            if (lane == INNER or lane == OUTER) and F[i, FX] >= P[P_XEXIT]:
                frac = 1.0
                if F[i, FX] > X0[i]:
                    frac = (P[P_XEXIT] - X0[i]) / (F[i, FX] - X0[i])
                vid = I[i, IVID]
                rec_f[vid, 1] = t + frac * dt
                rec_i[vid, 2] = 1
                I[i, IACT] = 0
                ctr[C_NACT] -= 1

        # safety events on the new configuration
        order, starts = _ordering(F, I, X)
        n = order.shape[0]
        for m in range(n):
            f = order[m]
            if m + 1 < n and _track(I[f, ILANE]) == _track(I[order[m + 1], ILANE]):
                l = order[m + 1]
                gap = F[l, FX] - F[f, FX] - F[l, FLEN]
                vid_l = I[l, IVID]
                if gap < 0.0:
                    if I[f, ICOLL] != vid_l:
                        _log(ev_f, ev_i, ctr, t1, EV_COLLISION, I[f, IVID], vid_l, gap, I[f, IPLAN])
                        I[f, ICOLL] = vid_l
                    F[f, FX] = F[l, FX] - F[l, FLEN]
                    if F[f, FV] > F[l, FV]:
                        F[f, FV] = F[l, FV]
                    if I[f, IPLAN] == 1:
                        I[f, IPLAN] = 0
                        F[f, FOFF] = 0.0
                        F[f, FNEXT] = t1 + P[P_REPLAN] if I[f, ILANE] == RAMP else math.inf
                        _log(ev_f, ev_i, ctr, t1, EV_PLAN_BREAK, I[f, IVID], vid_l, gap, 2)
                elif I[f, ICOLL] == vid_l:
                    I[f, ICOLL] = -1
                if (I[f, IPLAN] == 1 or I[l, IPLAN] == 1) and gap < S_safe - 1e-6:
                    if I[f, ICONF] < 0 or I[f, ICONFW] != vid_l:
                        I[f, ICONF] = _log(ev_f, ev_i, ctr, t1, EV_CONFLICT, I[f, IVID], vid_l, gap, 0)
                        I[f, ICONFW] = vid_l
                    elif gap < ev_f[I[f, ICONF], 1]:
                        ev_f[I[f, ICONF], 1] = gap
                else:
                    I[f, ICONF] = -1
                    I[f, ICONFW] = -1
            else:
                I[f, ICONF] = -1
                I[f, ICONFW] = -1
            dmax = F[f, FDMAX]
            if F[f, FA] <= -dmax + 1e-9 and (I[f, IFLAG] & FLAG_EBRAKE) == 0:
                _log(ev_f, ev_i, ctr, t1, EV_EMERGENCY_BRAKE, I[f, IVID], -1, F[f, FA], 0)
                I[f, IFLAG] |= FLAG_EBRAKE
            elif F[f, FA] > -0.5 * dmax and (I[f, IFLAG] & FLAG_EBRAKE) != 0:
                I[f, IFLAG] &= ~FLAG_EBRAKE
            if (
                I[f, ILANE] == ACCEL
                and F[f, FV] < 0.1
                and F[f, FX] > P[P_LB] - P[P_S0] - 1.0
                and (I[f, IFLAG] & FLAG_STOP) == 0
            ):
                _log(ev_f, ev_i, ctr, t1, EV_FORCED_STOP, I[f, IVID], -1, F[f, FX], 0)
                I[f, IFLAG] |= FLAG_STOP

        # trace rows, ordered by vehicle id
        vids = np.empty(n, np.int64)
        for m in range(n):
            vids[m] = I[order[m], IVID]
        perm = np.argsort(vids, kind="mergesort")
        r = ctr[C_TRACE]
        for m in range(n):
            i = order[perm[m]]
            tr_k[r] = k + 1
            tr_vid[r] = I[i, IVID]
            tr_cls[r] = I[i, ICLS]
            tr_lane[r] = I[i, ILANE]
            tr_x[r] = F[i, FX]
            tr_v[r] = F[i, FV]
            tr_a[r] = F[i, FA]
            r += 1
        ctr[C_TRACE] = r
    return ST_DONE, k1
