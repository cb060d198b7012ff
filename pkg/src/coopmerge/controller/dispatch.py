"""Strategy dispatch for one ramp vehicle and one cooperative candidate."""

from __future__ import annotations

from ..baseline import idm_clamped
from ..core import Lane, TrajectoryPlan, VehicleClass, VehicleState
from ..errors import InfeasibleCase
from ..safety import ramp_arrival_time
from .context import MergeContext, Solved, StrategyDecision, StrategyKind, TrafficState
from .solvers import (
    LaneChangeCase,
    classify_lane_change_case,
    post_lane_change_gap_fix,
    solve_coop_accel,
    solve_follower_decel,
    solve_leader_accel,
    solve_ramp_accel_adjust,
)
from .validate import TAIL, validate_plan

# plans longer than this are rejected; a vehicle that slow is better served
# by its fallback behaviour and a later replan
MAX_HORIZON = 120.0

_CASE_KIND = {
    LaneChangeCase.DIRECT: StrategyKind.DIRECT,
    LaneChangeCase.FOLLOWER_DECEL: StrategyKind.FOLLOWER_DECEL,
    LaneChangeCase.LEADER_ACCEL: StrategyKind.LEADER_ACCEL,
    LaneChangeCase.NO_LANE_CHANGE: StrategyKind.COOP_ACCEL,
}


def ramp_plan(R: VehicleState, t_n: float, t_acc: float, a: float, tail: float = TAIL) -> TrajectoryPlan:
    """Cruise to the acceleration lane, accelerate, enter the outer lane, then hold speed."""
    lcs = []
    if R.lane == Lane.RAMP:
        lcs.append((t_n, Lane.ACCEL))
    lcs.append((t_n + t_acc, Lane.OUTER))
    return TrajectoryPlan.from_phases(R.id, [(t_n, 0.0), (t_acc, a), (tail, 0.0)], lcs)


def _hold_plan(v: VehicleState, duration: float, lane_changes=()) -> TrajectoryPlan:
    return TrajectoryPlan.from_phases(v.id, [(duration, 0.0)], lane_changes)


def _ramp_phase_plan(v: VehicleState, t: float, a: float, horizon: float) -> TrajectoryPlan:
    return TrajectoryPlan.from_phases(v.id, [(t, a), (max(horizon - t, 0.0), 0.0)])


def _require_free(ctx: MergeContext, v: VehicleState | None, what: str) -> None:
    if v is not None and v.id in ctx.locked:
        raise InfeasibleCase(f"{what} already follows another plan")


def _lane_change(ctx: MergeContext, case: LaneChangeCase) -> tuple[Solved, dict]:
    R, p, lay, saf = ctx.R, ctx.p, ctx.layout, ctx.safety
    if p.vclass.vclass != VehicleClass.CAV:
        raise InfeasibleCase("only a CAV may move to the inner lane")
    _require_free(ctx, p, "p")
    if p.x >= 0:
        raise InfeasibleCase("p has reached the acceleration lane")
    if p.v < R.v:
        raise InfeasibleCase("p slower than the ramp cruising speed")
    t_n, t_acc, t_r, x_m = ramp_arrival_time(R.x, R.v, ctx.a_r, p.v, lay.L_b, (lay.v_lim_min, lay.v_lim_max))
    sol = Solved(t_normal=t_n, t_accel=t_acc, t_r=t_r, t_merge=ctx.t + t_r, v_merge=p.v, x_merge=x_m, a_ramp=ctx.a_r)
    horizon = t_r + TAIL
    plans = {R.id: ramp_plan(R, t_n, t_acc, ctx.a_r)}
    t_lc = 0.0
    if case == LaneChangeCase.FOLLOWER_DECEL:
        q1 = ctx.q_plus1
        _require_free(ctx, q1, "q+1")
        a, t_lc = solve_follower_decel(-p.x, -q1.x, p.v, q1.v, None, saf, p.length, q1.vclass.decel_max), 0.5 * (-p.x) / p.v
        sol.a_decel_q1, sol.t_q1 = a, t_lc
        plans[q1.id] = _ramp_phase_plan(q1, t_lc, -a, horizon)
    elif case == LaneChangeCase.LEADER_ACCEL:
        q, q1 = ctx.q, ctx.q_plus1
        _require_free(ctx, q, "q")
        a_safe = q.vclass.accel_max
        if ctx.q_leader is not None:
            ql = ctx.q_leader
            gap = ql.x - q.x - ql.length
            a_safe = min(a_safe, idm_clamped(q.v, ql.v, gap, 2.0, 1.0, q.vclass.accel_max, q.vclass.decel_max, 4.0, lay.v_lim_max))
        a_safe = max(a_safe, 0.0)
        S_q1 = -q1.x if q1 is not None else float("inf")
        v_q1 = q1.v if q1 is not None else 0.0
        a, t_lc = solve_leader_accel(
            -p.x, -q.x, S_q1, p.v, q.v, v_q1, saf, q.length, p.length, a_safe, q.vclass.accel_min
        )
        sol.a_accel_q, sol.t_q = a, t_lc
        plans[q.id] = _ramp_phase_plan(q, t_lc, a, horizon)
    if t_lc > t_r:
        raise InfeasibleCase("p would leave the outer lane after the merge")
    plans[p.id] = _hold_plan(p, horizon, [(t_lc, Lane.INNER)])
    pm, pp = ctx.p_minus1, ctx.p_plus1
    fix = post_lane_change_gap_fix(
        x_m,
        R.length,
        t_r,
        saf,
        (pm.x, pm.v, pm.length, pm.vclass.accel_max) if pm is not None else None,
        (pp.x, pp.v, pp.vclass.decel_max) if pp is not None else None,
        literal=ctx.literal_gap_fix,
    )
    sol.delta_S_lead, sol.delta_S_follow = fix.delta_S_lead, fix.delta_S_follow
    if fix.a_p_minus1 is not None:
        _require_free(ctx, pm, "p-1")
        sol.a_p_minus1 = fix.a_p_minus1
        plans[pm.id] = _ramp_phase_plan(pm, t_r, fix.a_p_minus1, horizon)
    if fix.a_decel_p1 is not None:
        _require_free(ctx, pp, "p+1")
        sol.a_decel_p1 = fix.a_decel_p1
        plans[pp.id] = _ramp_phase_plan(pp, t_r, -fix.a_decel_p1, horizon)
    return sol, plans


def _coop_accel(ctx: MergeContext) -> tuple[Solved, dict]:
    R, p = ctx.R, ctx.p
    _require_free(ctx, p, "p")
    pp = ctx.p_plus1
    res = solve_coop_accel(
        R.x,
        R.v,
        ctx.a_r,
        p.x,
        p.v,
        ctx.layout,
        ctx.safety,
        L_p=p.length,
        L_R=R.length,
        accel_max_p=p.vclass.accel_max,
        p_plus1=(pp.x, pp.v) if pp is not None else None,
    )
    sol = Solved(
        t_normal=res.t_normal,
        t_accel=res.t_accel,
        t_r=res.t_r,
        t_merge=ctx.t + res.t_r,
        v_merge=res.v_merge,
        x_merge=res.x_merge,
        a_ramp=ctx.a_r,
        a_accel_p=res.a_accel_p,
    )
    plans = {
        R.id: ramp_plan(R, res.t_normal, res.t_accel, ctx.a_r),
        p.id: _ramp_phase_plan(p, res.t_r, res.a_accel_p, res.t_r + TAIL),
    }
    return sol, plans


def _ramp_adjust(ctx: MergeContext) -> tuple[Solved, dict]:
    R, p, pp = ctx.R, ctx.p, ctx.p_plus1
    res = solve_ramp_accel_adjust(
        R.x,
        R.v,
        p.x,
        p.v,
        ctx.layout,
        ctx.safety,
        L_p=p.length,
        L_R=R.length,
        accel_min=R.vclass.accel_min,
        accel_max=R.vclass.accel_max,
        p_plus1=(pp.x, pp.v, pp.vclass.decel_max) if pp is not None else None,
    )
    sol = Solved(
        t_normal=res.t_normal,
        t_accel=res.t_accel,
        t_r=res.t_r,
        t_merge=ctx.t + res.t_r,
        v_merge=res.v_merge,
        x_merge=res.x_merge,
        a_ramp=res.a_ramp,
        a_decel_p1=res.a_decel_p1,
    )
    horizon = res.t_r + TAIL
    plans = {R.id: ramp_plan(R, res.t_normal, res.t_accel, res.a_ramp)}
    if p.id not in ctx.locked:
        plans[p.id] = _hold_plan(p, horizon)
    if res.a_decel_p1 is not None:
        _require_free(ctx, pp, "p+1")
        plans[pp.id] = _ramp_phase_plan(pp, res.t_r, -res.a_decel_p1, horizon)
    return sol, plans


def strategy_ladder(ctx: MergeContext, traffic: TrafficState) -> list[StrategyKind]:
    """Order in which strategies are tried for this ramp vehicle and candidate."""
    if ctx.p is None:
        return [StrategyKind.FREE_MERGE]
    if ctx.p.vclass.vclass == VehicleClass.CAT:
        return [StrategyKind.RAMP_ADJUST]
    lc = _CASE_KIND[classify_lane_change_case(ctx.S_f, ctx.S_b, ctx.safety.S_safe)]
    if traffic.heavy:
        ladder = [StrategyKind.RAMP_ADJUST, lc, StrategyKind.COOP_ACCEL]
    else:
        ladder = [lc, StrategyKind.COOP_ACCEL, StrategyKind.RAMP_ADJUST]
    seen = []
    for k in ladder:
        if k not in seen:
            seen.append(k)
    return seen


def free_merge(ctx: MergeContext) -> tuple[Solved, dict]:
    """Merge with no cooperative vehicle: accelerate toward the outer-lane speed."""
    R, lay = ctx.R, ctx.layout
    a = ctx.a_r
    v_reach = (R.v * R.v + 2.0 * a * lay.L_b) ** 0.5
    v_m = min(lay.outer_speed, v_reach, lay.v_lim_max)
    v_m = max(v_m, R.v)
    t_n, t_acc, t_r, x_m = ramp_arrival_time(R.x, R.v, a, v_m, lay.L_b, (lay.v_lim_min, lay.v_lim_max))
    sol = Solved(t_normal=t_n, t_accel=t_acc, t_r=t_r, t_merge=ctx.t + t_r, v_merge=v_m, x_merge=x_m, a_ramp=a)
    return sol, {R.id: ramp_plan(R, t_n, t_acc, a)}


_SOLVERS = {
    StrategyKind.COOP_ACCEL: _coop_accel,
    StrategyKind.RAMP_ADJUST: _ramp_adjust,
    StrategyKind.FREE_MERGE: free_merge,
}


def plan_merge(ctx: MergeContext, traffic: TrafficState | None = None) -> StrategyDecision:
    """Try each strategy in ladder order; release the first one whose plans validate.

    Returns a decision of kind ``Infeasible`` (with the reasons collected in
    ``attempts``) when nothing works for this candidate.
    """
    traffic = traffic or TrafficState()
    R, p = ctx.R, ctx.p
    attempts = []
    states = list(ctx.neighbors)
    known = {s.id for s in states}
    for v in (R, p, ctx.q, ctx.q_plus1, ctx.p_minus1, ctx.p_plus1):
        if v is not None and v.id not in known:
            states.append(v)
            known.add(v.id)
    for kind in strategy_ladder(ctx, traffic):
        try:
            if kind.is_lane_change:
                case = next(c for c, k in _CASE_KIND.items() if k == kind)
                sol, plans = _lane_change(ctx, case)
            else:
                sol, plans = _SOLVERS[kind](ctx)
        except (InfeasibleCase, ValueError) as exc:
            attempts.append((kind.value, type(exc).__name__, str(exc)))
            continue
        horizon = max(pl.horizon for pl in plans.values())
        if horizon > MAX_HORIZON:
            attempts.append((kind.value, "HorizonTooLong", f"{horizon:.1f} s"))
            continue
        violations = validate_plan(
            plans,
            states,
            ctx.safety,
            ctx.layout,
            t0=ctx.t,
            predictors=ctx.predictors,
            ramp_id=R.id,
            coop_id=p.id if p is not None else None,
            protected=[R.id] + ([p.id] if p is not None else []),
        )
        if violations:
            attempts.append((kind.value, "Violations", violations[0]))
            continue
        return StrategyDecision(kind, R.id, p.id if p is not None else None, sol, plans, ctx.t, attempts)
    return StrategyDecision(StrategyKind.INFEASIBLE, R.id, p.id if p is not None else None, t_issue=ctx.t, attempts=attempts)

