"""Release gate for merge decisions: sample every trajectory and check the constraints."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..core import CompiledPlan, Lane, RoadLayout, TrajectoryPlan, VehicleState
from ..safety import SafetyParams

SAMPLE_DT = 0.01
TAIL = 2.0
GAP_TOL = 1e-3


@dataclass(frozen=True)
class Violation:
    kind: str
    t: float
    vehicle_id: int | str
    other_id: int | str | None = None
    value: float = 0.0


def _track(lanes: np.ndarray) -> np.ndarray:
    return np.where(lanes >= int(Lane.ACCEL), 2, lanes)


def validate_plan(
    plans: Iterable[TrajectoryPlan] | Mapping,
    states: Sequence[VehicleState],
    safety: SafetyParams,
    layout: RoadLayout,
    t0: float = 0.0,
    predictors: Mapping | None = None,
    ramp_id=None,
    coop_id=None,
    protected: Iterable = (),
) -> list[Violation]:
    """Check a set of new plans against each other and against their surroundings.

    Every vehicle in ``states`` is predicted over the plan horizon plus a
    short tail: new plans first, then existing ``predictors`` (compiled
    plans keyed by vehicle id), otherwise constant speed; unplanned vehicles
    on the ramp or acceleration lane are assumed to brake to a stop. Pairs on the same
    longitudinal track that involve a planned or ``protected`` vehicle must
    keep ``S_safe``; a pair that already starts tighter only has to avoid
    closing further.

    Args:
        plans: New plans, as an iterable or a mapping keyed by vehicle id.
        states: Current states of every relevant vehicle, including those
            with new plans.
        ramp_id: The merging vehicle; its entry to the outer lane must lie on
            the acceleration lane.
        coop_id: Cooperative vehicle whose speed the merging vehicle must
            match (within 0.1 m/s) when it enters the outer lane.
        protected: Extra ids whose pairs need the full safe spacing.

    Returns:
        Violations, empty when the plans can be released.
    """
    if isinstance(plans, Mapping):
        plans = list(plans.values())
    plans = list(plans)
    predictors = predictors or {}
    by_id = {s.id: s for s in states}
    missing = [p.vehicle_id for p in plans if p.vehicle_id not in by_id]
    if missing:
        raise ValueError(f"plans reference unknown vehicles {missing}")
    out: list[Violation] = []
    # existing plans of the surrounding vehicles are followed to their end
    # too, so a merge they schedule after the new plans finish is still seen
    ends = [predictors[vid].t_end - t0 for vid in by_id if vid in predictors]
    horizon = max([p.horizon for p in plans] + ends + [0.0]) + TAIL
    ts = t0 + np.arange(0.0, horizon + 0.5 * SAMPLE_DT, SAMPLE_DT)
    compiled = {}
    for p in plans:
        s = by_id[p.vehicle_id]
        compiled[p.vehicle_id] = CompiledPlan(p, t0, s.x, s.v, s.lane)
        for seg in p.segments:
            if seg.a > s.vclass.accel_max + 1e-9 or seg.a < -s.vclass.decel_max - 1e-9:
                out.append(Violation("AccelBound", t0 + seg.t_start, s.id, value=seg.a))
    # the pair checks only involve planned or protected vehicles, so anyone
    # who cannot come within reach of them over the horizon is dropped
    # before sampling; positions never decrease, so [x, x + v_max * span]
    # bounds every prediction
    protected = set(protected)
    span = ts[-1] - t0
    reach = max((s.length for s in states), default=0.0) + safety.S_safe + 1.0
    v_cap = max([layout.v_lim_max] + [s.v for s in states])
    key = [s for s in states if s.id in compiled or s.id in protected]
    lo_f = min((s.x for s in key), default=np.inf) - reach
    hi_f = max((s.x for s in key), default=-np.inf) + v_cap * span + reach
    states = [s for s in states if s.id in compiled or s.id in protected or (s.x < hi_f and s.x + v_cap * span > lo_f)]
    n, T = len(states), ts.size
    X = np.empty((n, T))
    V = np.empty((n, T))
    LN = np.empty((n, T), dtype=np.int8)
    for i, s in enumerate(states):
        cp = compiled.get(s.id) or predictors.get(s.id)
        if cp is not None:
            X[i], V[i] = cp.sample(ts)
            LN[i] = cp.lanes(ts)
        elif s.lane in (Lane.RAMP, Lane.ACCEL):
            # an unplanned vehicle on the ramp track may be about to stop at
            # the lane end; assume it brakes as hard as it can
            d = s.vclass.decel_max
            tau = np.minimum(ts - t0, s.v / d)
            X[i] = s.x + s.v * tau - 0.5 * d * tau * tau
            V[i] = s.v - d * tau
            LN[i] = int(s.lane)
        else:
            X[i] = s.x + s.v * (ts - t0)
            V[i] = s.v
            LN[i] = int(s.lane)
    TR = _track(LN)
    lengths = np.array([s.length for s in states])
    ids = [s.id for s in states]
    idx = {vid: i for i, vid in enumerate(ids)}

    for vid in compiled:
        i = idx[vid]
        bad = (V[i] < -1e-9) | (V[i] > layout.v_lim_max + 1e-6)
        if bad.any():
            k = int(np.argmax(bad))
            out.append(Violation("Speed", float(ts[k]), vid, value=float(V[i, k])))
        if states[i].vclass.vclass.value == "CAT" and (LN[i] == int(Lane.INNER)).any():
            k = int(np.argmax(LN[i] == int(Lane.INNER)))
            out.append(Violation("InnerLaneCAT", float(ts[k]), vid))

    if ramp_id is not None and ramp_id in idx:
        i = idx[ramp_id]
        merged = LN[i] == int(Lane.OUTER)
        if merged.any():
            k = int(np.argmax(merged))
            if X[i, k] > layout.L_b + 1e-6:
                out.append(Violation("LaneEnd", float(ts[k]), ramp_id, value=float(X[i, k])))
            if coop_id is not None and coop_id in idx:
                dv = abs(V[i, k] - V[idx[coop_id], k])
                if dv > 0.1:
                    out.append(Violation("SpeedMismatch", float(ts[k]), ramp_id, coop_id, float(dv)))

    req_full = safety.S_safe - GAP_TOL
    planned = set(compiled) | set(predictors)
    focus = [idx[v] for v in compiled] + [idx[v] for v in protected if v in idx and v not in compiled]
    # pairs whose position ranges never come within reach cannot violate
    lo, hi = X.min(axis=1), X.max(axis=1)
    checked = set()
    for j in focus:
        near = (lo < hi[j] + reach) & (hi > lo[j] - reach)
        others = np.array(
            [i for i in np.nonzero(near)[0] if i != j and (min(i, j), max(i, j)) not in checked], dtype=np.intp
        )
        checked.update((min(i, j), max(i, j)) for i in others)
        if others.size == 0:
            continue
        same = TR[others] == TR[j]
        shared = same.any(axis=1)
        others, same = others[shared], same[shared]
        if others.size == 0:
            continue
        ahead = (X[others] > X[j]) | ((X[others] == X[j]) & (others[:, None] > j))
        gap = np.where(ahead, X[others] - X[j] - lengths[others, None], X[j] - X[others] - lengths[j])
        req = np.full(others.size, req_full)
        g0 = np.where(same[:, 0], gap[:, 0], np.inf)
        req = np.minimum(req, g0 - GAP_TOL)
        bad = same & (gap < req[:, None])
        rows = np.nonzero(bad.any(axis=1))[0]
        for r in rows:
            k = int(np.argmax(bad[r]))
            i = int(others[r])
            kind = "MergeGap" if ids[i] == ramp_id or ids[j] == ramp_id else "Gap"
            out.append(Violation(kind, float(ts[k]), ids[j], ids[i], float(gap[r, k])))
        if ids[j] in compiled:
            out.extend(_braking_envelope(j, others, same & ahead, gap, V, TR, states, ids, ts, planned, safety.S_safe))
    out.sort(key=lambda v: (v.t, v.kind))
    return out


def _braking_envelope(j, others, behind, gap, V, TR, states, ids, ts, planned, S_safe):
    """A planned follower must stay able to stop behind an unplanned mainline leader.

    Connected vehicles react to a leader's braking in the same step, so the
    follower's speed may not exceed what lets it stop half the safe spacing
    short of a leader braking no harder than the follower can.
    """
    out = []
    dj = states[j].vclass.decel_max
    for r in range(others.size):
        i = int(others[r])
        if ids[i] in planned:
            continue
        mask = behind[r] & (TR[i] < 2)
        if not mask.any():
            continue
        d_eff = min(states[i].vclass.decel_max, dj)
        room = V[i] ** 2 * dj / d_eff + 2.0 * dj * (gap[r] - 0.5 * S_safe)
        v_safe = np.sqrt(np.maximum(room, 0.0))
        bad = mask & (V[j] > v_safe + 1e-6)
        if bad.any():
            k = int(np.argmax(bad))
            out.append(Violation("Braking", float(ts[k]), ids[j], ids[i], float(V[j, k] - v_safe[k])))
    return out
