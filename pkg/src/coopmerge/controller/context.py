"""Inputs and outputs of the merge planner, and cooperative-vehicle selection."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from ..core import CompiledPlan, RoadLayout, VehicleState, bumper_gap
from ..errors import InfeasibleCase, NoCandidate
from ..safety import SafetyParams, ramp_arrival_time


class StrategyKind(str, enum.Enum):
    DIRECT = "DirectLaneChange"
    FOLLOWER_DECEL = "LaneChangeFollowerDecel"
    LEADER_ACCEL = "LaneChangeLeaderAccel"
    COOP_ACCEL = "MainlineCoopAccel"
    RAMP_ADJUST = "RampAccelAdjust"
    FREE_MERGE = "FreeMerge"
    INFEASIBLE = "Infeasible"

    @property
    def is_lane_change(self) -> bool:
        return self in (StrategyKind.DIRECT, StrategyKind.FOLLOWER_DECEL, StrategyKind.LEADER_ACCEL)


@dataclass(frozen=True)
class TrafficState:
    """Coarse traffic measurement used to order the strategy ladder."""

    outer_flow: float = 0.0
    heavy_threshold: float = 1400.0

    @property
    def heavy(self) -> bool:
        return self.outer_flow >= self.heavy_threshold


@dataclass
class MergeContext:
    """Snapshot handed to the planner for one ramp vehicle and one candidate ``p``.

    ``neighbors`` lists every vehicle that plans must be checked against.
    ``predictors`` holds the active plans of vehicles that already follow
    one; those vehicles are ``locked`` and cannot receive a new plan.
    """

    R: VehicleState
    p: VehicleState | None
    layout: RoadLayout
    safety: SafetyParams
    q: VehicleState | None = None
    q_plus1: VehicleState | None = None
    q_leader: VehicleState | None = None
    p_minus1: VehicleState | None = None
    p_plus1: VehicleState | None = None
    a_r_default: float | None = None
    t: float = 0.0
    neighbors: Sequence[VehicleState] = ()
    predictors: Mapping[int | str, CompiledPlan] = field(default_factory=dict)
    locked: frozenset = frozenset()
    literal_gap_fix: bool = False

    @property
    def S_f(self) -> float:
        if self.q is None or self.p is None:
            return float("inf")
        return bumper_gap(self.q, self.p)

    @property
    def S_b(self) -> float:
        if self.q_plus1 is None or self.p is None:
            return float("inf")
        return bumper_gap(self.p, self.q_plus1)

    @property
    def a_r(self) -> float:
        return self.a_r_default if self.a_r_default is not None else self.R.vclass.accel_max


@dataclass
class Solved:
    t_normal: float = 0.0
    t_accel: float = 0.0
    t_r: float = 0.0
    t_merge: float = 0.0
    v_merge: float = 0.0
    x_merge: float = 0.0
    a_ramp: float | None = None
    a_decel_q1: float | None = None
    t_q1: float | None = None
    a_accel_q: float | None = None
    t_q: float | None = None
    a_accel_p: float | None = None
    a_p_minus1: float | None = None
    a_decel_p1: float | None = None
    delta_S_lead: float | None = None
    delta_S_follow: float | None = None


@dataclass
class StrategyDecision:
    kind: StrategyKind
    R_id: int | str
    p_id: int | str | None = None
    solved: Solved = field(default_factory=Solved)
    plans: dict = field(default_factory=dict)
    t_issue: float = 0.0
    attempts: list = field(default_factory=list)

    @property
    def released(self) -> bool:
        return self.kind != StrategyKind.INFEASIBLE


@dataclass(frozen=True)
class Candidate:
    vehicle: VehicleState
    t_r: float
    t_m: float
    x_merge: float

    @property
    def mismatch(self) -> float:
        return abs(self.t_m - self.t_r)


def rank_cooperative_candidates(
    R: VehicleState,
    outer_vehicles: Sequence[VehicleState],
    a_r: float,
    layout: RoadLayout | None = None,
) -> list[Candidate]:
    """All usable outer-lane candidates, best first.

    For each candidate the ramp vehicle's arrival at the merge point is
    computed with the candidate's speed as merge speed; the candidate's own
    arrival assumes constant speed. Candidates that already passed the merge
    point, or whose speed cannot be matched on the lane, are dropped.
    Ranking is by arrival mismatch, ties toward the earlier arrival.
    """
    layout = layout or RoadLayout()
    window = (layout.v_lim_min, layout.v_lim_max)
    out = []
    for c in outer_vehicles:
        if c.v <= 0:
            continue
        try:
            _, _, t_r, x_m = ramp_arrival_time(R.x, R.v, a_r, max(c.v, R.v), layout.L_b, window)
        except (InfeasibleCase, ValueError):
            continue
        if c.x >= x_m:
            continue
        out.append(Candidate(c, t_r, (x_m - c.x) / c.v, x_m))
    out.sort(key=lambda k: (round(k.mismatch, 9), k.t_m))
    return out


def select_cooperative_vehicle(
    R: VehicleState,
    outer_vehicles: Sequence[VehicleState],
    a_r: float,
    layout: RoadLayout | None = None,
) -> tuple[VehicleState, float, float]:
    """Best cooperative vehicle for ``R`` as ``(p, t_r, t_m)``.

    Raises:
        NoCandidate: nothing on the outer lane can cooperate.
    """
    ranked = rank_cooperative_candidates(R, outer_vehicles, a_r, layout)
    if not ranked:
        raise NoCandidate("no outer-lane vehicle can cooperate")
    best = ranked[0]
    return best.vehicle, best.t_r, best.t_m

