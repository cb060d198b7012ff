"""Road-segment management unit: candidate loop around :func:`plan_merge`."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

from ..core import CompiledPlan, Lane, RoadLayout, Role, VehicleState
from ..safety import SafetyParams
from .context import MergeContext, StrategyDecision, StrategyKind, TrafficState, rank_cooperative_candidates
from .dispatch import plan_merge


def virtual_state(state: VehicleState, cp: CompiledPlan, t: float) -> VehicleState:
    """Constant-speed stand-in for a vehicle that follows a plan.

    The stand-in coincides with the plan once it ends and runs ahead of it
    before then (the plan only accelerates toward its final speed).
    """
    t_end = cp.t_end
    if t >= t_end:
        return state
    x_end, v_end = cp.state_at(t_end)
    lane = cp.lane_at(t_end)
    return replace(state, x=x_end - v_end * (t_end - t), v=v_end, lane=lane, a=0.0)


@dataclass
class RSMU:
    """Plans merges for ramp vehicles from a snapshot of the segment."""

    layout: RoadLayout
    safety: SafetyParams
    a_r_default: float | None = None
    candidate_limit: int = 5
    literal_gap_fix: bool = False

    def plan(
        self,
        R: VehicleState,
        states: Sequence[VehicleState],
        predictors: Mapping[int, CompiledPlan],
        t: float,
        traffic: TrafficState | None = None,
    ) -> StrategyDecision:
        """Find the first releasable decision for ramp vehicle ``R``.

        Candidates are tried best first; for each, the dispatch ladder runs.
        A free merge is the last resort. The returned decision is
        ``Infeasible`` when nothing validates.
        """
        traffic = traffic or TrafficState()
        locked = frozenset(predictors)
        virt = {}
        for s in states:
            virt[s.id] = virtual_state(s, predictors[s.id], t) if s.id in predictors else s
        R_plan = replace(R, role=Role.RAMP_TARGET)
        outer = sorted((v for v in virt.values() if v.lane == Lane.OUTER and v.id != R.id), key=lambda v: v.x)
        inner = sorted((v for v in virt.values() if v.lane == Lane.INNER), key=lambda v: v.x)
        a_r = self.a_r_default if self.a_r_default is not None else R.vclass.accel_max
        ranked = rank_cooperative_candidates(R_plan, outer, a_r, self.layout)
        attempts = []
        for cand in ranked[: self.candidate_limit]:
            p = cand.vehicle
            k = next(i for i, v in enumerate(outer) if v.id == p.id)
            p_minus1 = outer[k + 1] if k + 1 < len(outer) else None
            p_plus1 = outer[k - 1] if k > 0 else None
            q = next((v for v in inner if v.x >= p.x), None)
            q_plus1 = next((v for v in reversed(inner) if v.x < p.x), None)
            q_leader = None
            if q is not None:
                q_leader = next((v for v in inner if v.x > q.x), None)
            ctx = MergeContext(
                R=R_plan,
                p=replace(p, role=Role.COOPERATIVE),
                layout=self.layout,
                safety=self.safety,
                q=q,
                q_plus1=q_plus1,
                q_leader=q_leader,
                p_minus1=p_minus1,
                p_plus1=p_plus1,
                a_r_default=self.a_r_default,
                t=t,
                neighbors=states,
                predictors=predictors,
                locked=locked,
                literal_gap_fix=self.literal_gap_fix,
            )
            decision = plan_merge(ctx, traffic)
            attempts.extend((p.id,) + a for a in decision.attempts)
            if decision.released:
                decision.attempts = attempts
                return decision
        ctx = MergeContext(
            R=R_plan,
            p=None,
            layout=self.layout,
            safety=self.safety,
            a_r_default=self.a_r_default,
            t=t,
            neighbors=states,
            predictors=predictors,
            locked=locked,
        )
        decision = plan_merge(ctx, traffic)
        attempts.extend((None,) + a for a in decision.attempts)
        decision.attempts = attempts
        if not decision.released:
            decision.kind = StrategyKind.INFEASIBLE
        return decision
