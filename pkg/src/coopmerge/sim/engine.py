"""Fixed-step simulation world and the ``run`` entry point."""

from __future__ import annotations

import math

import numpy as np

from ..core import CAT, CAV, CompiledPlan, Lane, TrajectoryPlan, VehicleClass, VehicleState
from ..controller.context import TrafficState
from ..controller.rsmu import RSMU
from ..errors import ConfigError
from . import kernels as K
from .arrivals import STREAM_INNER, STREAM_OUTER, STREAM_RAMP, class_draws, spawn_stream
from .config import ScenarioConfig, Strategy
from .trace import EVENT_CODES, TraceLog

_CLASS = (CAV, CAT)


class World:
    """Mutable simulation state backed by the compiled kernel's flat arrays.

    Args:
        config: Scenario configuration.
        capacity: Maximum number of simultaneously active vehicles.
        spawn: Generate the configured arrival streams. Tests that place
            vehicles by hand pass ``False``.
    """

    def __init__(self, config: ScenarioConfig, capacity: int = 512, spawn: bool = True):
        self.config = config
        self.k = 0
        C = capacity
        self.F = np.zeros((C, K.NF))
        self.I = np.zeros((C, K.NI), np.int64)
        self.PS = np.zeros((C, K.MAXSEG + 1, 4))
        self.PL = np.zeros((C, K.MAXLC + 1, 2))
        self.P = self._params(config)
        streams = []
        classes = []
        flows = (config.mainline_flow, config.mainline_flow, config.ramp_flow)
        for s, flow in zip((STREAM_INNER, STREAM_OUTER, STREAM_RAMP), flows):
            times = spawn_stream(flow, config.duration, config.seed, config.min_headway, s) if spawn else np.empty(0)
            share = 0.0 if s == STREAM_INNER else config.cat_share
            streams.append(times)
            classes.append(class_draws(times.size, share, config.seed, s))
        n_max = max([t.size for t in streams] + [1])
        self.arr_t = np.full((3, n_max), np.inf)
        self.arr_cls = np.zeros((3, n_max), np.int64)
        for s in range(3):
            self.arr_t[s, : streams[s].size] = streams[s]
            self.arr_cls[s, : classes[s].size] = classes[s]
        self.arr_n = np.array([t.size for t in streams], np.int64)
        self.ptr = np.zeros(3, np.int64)
        n_veh = int(self.arr_n.sum()) + 16
        self.rec_f = np.full((n_veh, 4), np.nan)
        self.rec_i = np.zeros((n_veh, 3), np.int64)
        self.ctr = np.zeros(4, np.int64)
        ss = np.random.SeedSequence([int(config.seed), 99])
        self.rng = np.array([ss.generate_state(1, np.uint64)[0]], np.uint64)
        cap = 1 << 16
        self.tr_k = np.empty(cap, np.int32)
        self.tr_vid = np.empty(cap, np.int32)
        self.tr_cls = np.empty(cap, np.int8)
        self.tr_lane = np.empty(cap, np.int8)
        self.tr_x = np.empty(cap)
        self.tr_v = np.empty(cap)
        self.tr_a = np.empty(cap)
        self.ev_f = np.empty((4096, 2))
        self.ev_i = np.empty((4096, 4), np.int64)
        self.py_events: list[tuple] = []
        self.decisions: list[dict] = []
        self.plans: dict[int, CompiledPlan] = {}
        self.rsmu = RSMU(
            config.layout,
            config.safety,
            config.a_r_default,
            config.candidate_limit,
            config.literal_gap_fix,
        )

    # --- setup ------------------------------------------------------------
    @staticmethod
    def _params(c: ScenarioConfig) -> np.ndarray:
        P = np.zeros(K.NP)
        lay = c.layout
        P[K.P_DT] = c.dt
        P[K.P_S0] = c.idm.s0
        P[K.P_T] = c.idm.T
        P[K.P_DELTA] = c.idm.delta
        P[K.P_VIN] = lay.inner_speed
        P[K.P_VOUT] = lay.outer_speed
        P[K.P_VRAMP] = c.ramp_speed
        P[K.P_LB] = lay.L_b
        P[K.P_XEXIT] = lay.exit_x
        P[K.P_XMAIN] = lay.mainline_entry
        P[K.P_XRAMP] = lay.ramp_entry
        P[K.P_SSAFE] = c.safety.S_safe
        P[K.P_KV] = c.control.k_v
        P[K.P_KP] = c.control.k_p
        P[K.P_KD] = c.control.k_d
        P[K.P_H] = c.control.h
        P[K.P_POS] = c.error_injection.pos_bound
        P[K.P_TRK] = c.error_injection.trk_bound
        P[K.P_INJ] = 1.0 if c.error_injection.enabled else 0.0
        P[K.P_MODE] = 1.0 if c.strategy == Strategy.PREEMPTIVE else 0.0
        lc = c.lane_change
        P[K.P_COOPW] = lc.cooperative_weight
        P[K.P_GAINW] = lc.speedgain_weight
        P[K.P_THR] = lc.gain_threshold
        P[K.P_COOL] = lc.cooldown
        P[K.P_SDL] = lc.safety_decel_limit or 0.0
        P[K.P_REPLAN] = c.replan_interval
        P[K.P_VMAX] = lay.v_lim_max
        return P

    @property
    def t(self) -> float:
        return self.k * self.config.dt

    def _slot_of(self, vid: int) -> int:
        rows = np.nonzero((self.I[:, K.IACT] == 1) & (self.I[:, K.IVID] == vid))[0]
        if rows.size == 0:
            raise KeyError(f"vehicle {vid} is not active")
        return int(rows[0])

    def add_vehicle(self, vclass: VehicleClass | str, lane: Lane, x: float, v: float) -> int:
        """Place a vehicle by hand; returns its id."""
        vclass = VehicleClass(vclass)
        free = np.nonzero(self.I[:, K.IACT] == 0)[0]
        if free.size == 0:
            raise ConfigError("world capacity exhausted")
        i = int(free[0])
        vid = int(self.ctr[K.C_VID])
        if vid >= self.rec_f.shape[0]:
            grow = self.rec_f.shape[0]
            self.rec_f = np.vstack([self.rec_f, np.full((grow, 4), np.nan)])
            self.rec_i = np.vstack([self.rec_i, np.zeros((grow, 3), np.int64)])
        self.ctr[K.C_VID] += 1
        cls = _CLASS[0 if vclass == VehicleClass.CAV else 1]
        self.F[i] = 0.0
        self.I[i] = 0
        self.F[i, K.FX] = x
        self.F[i, K.FV] = v
        self.F[i, K.FLEN] = cls.length
        self.F[i, K.FAMAX] = cls.accel_max
        self.F[i, K.FDMAX] = cls.decel_max
        self.F[i, K.FLCT] = -1e9
        self.F[i, K.FNEXT] = math.inf
        self.I[i, K.IACT] = 1
        self.I[i, K.IVID] = vid
        self.I[i, K.ICLS] = 0 if vclass == VehicleClass.CAV else 1
        self.I[i, K.ILANE] = int(lane)
        self.I[i, K.ICOLL] = -1
        self.I[i, K.ICONF] = -1
        self.I[i, K.ICONFW] = -1
        self.I[i, K.IYIELD] = -1
        lay = self.config.layout
        self.rec_f[vid] = (self.t, np.nan, lay.lane_speed(lane) if lane.is_mainline else lay.outer_speed, lay.exit_x - x)
        self.rec_i[vid] = (int(lane), self.I[i, K.ICLS], 0)
        self.ctr[K.C_NACT] += 1
        return vid

    def install_plan(self, vid: int, plan: TrajectoryPlan) -> CompiledPlan:
        """Make vehicle ``vid`` follow ``plan`` from the current time."""
        i = self._slot_of(vid)
        cp = CompiledPlan(plan, self.t, self.F[i, K.FX], self.F[i, K.FV], Lane(int(self.I[i, K.ILANE])))
        nseg = len(plan.segments)
        if nseg > K.MAXSEG or len(plan.lane_changes) > K.MAXLC:
            raise ValueError("plan too long for the kernel buffers")
        self.PS[i] = 0.0
        self.PS[i, : nseg + 1, K.SSTART] = cp.starts
        self.PS[i, : nseg + 1, K.SX] = cp.xs
        self.PS[i, : nseg + 1, K.SV] = cp.vs
        self.PS[i, : nseg + 1, K.SA] = cp.accs
        self.PL[i] = 0.0
        for k, (t_lc, lane) in enumerate(plan.lane_changes):
            self.PL[i, k] = (t_lc, int(lane))
        self.PL[i, K.MAXLC, 0] = int(self.I[i, K.ILANE])
        self.I[i, K.INSEG] = nseg
        self.I[i, K.INLC] = len(plan.lane_changes)
        self.I[i, K.IPLAN] = 1
        self.F[i, K.FPT0] = self.t
        self.F[i, K.FPEND] = plan.horizon
        self.F[i, K.FOFF] = 0.0
        self.plans[vid] = cp
        return cp

    # --- snapshots --------------------------------------------------------
    def states(self) -> list[VehicleState]:
        out = []
        for i in np.nonzero(self.I[:, K.IACT] == 1)[0]:
            out.append(
                VehicleState(
                    int(self.I[i, K.IVID]),
                    _CLASS[int(self.I[i, K.ICLS])],
                    Lane(int(self.I[i, K.ILANE])),
                    float(self.F[i, K.FX]),
                    float(self.F[i, K.FV]),
                    float(self.F[i, K.FA]),
                )
            )
        out.sort(key=lambda s: s.id)
        return out

    def active_predictors(self) -> dict[int, CompiledPlan]:
        live = {}
        for i in np.nonzero((self.I[:, K.IACT] == 1) & (self.I[:, K.IPLAN] == 1))[0]:
            vid = int(self.I[i, K.IVID])
            if vid in self.plans:
                live[vid] = self.plans[vid]
        self.plans = live
        return dict(live)

    def traffic_state(self) -> TrafficState:
        t = self.t
        spawn_t = self.rec_f[: self.ctr[K.C_VID], 0]
        lanes = self.rec_i[: self.ctr[K.C_VID], 0]
        recent = np.count_nonzero((lanes == int(Lane.OUTER)) & (spawn_t > t - 60.0) & (spawn_t <= t))
        window = min(60.0, max(t, self.config.dt))
        return TrafficState(recent * 3600.0 / window if t >= 60.0 else recent * 60.0, self.config.heavy_threshold)

    # --- stepping ---------------------------------------------------------
    def _plan_requests(self) -> None:
        t = self.t
        req = np.nonzero(
            (self.I[:, K.IACT] == 1)
            & (self.I[:, K.ILANE] == int(Lane.RAMP))
            & (self.I[:, K.IPLAN] == 0)
            & (self.F[:, K.FNEXT] <= t + 1e-9)
        )[0]
        req = sorted(req, key=lambda i: self.I[i, K.IVID])
        traffic = self.traffic_state()
        for i in req:
            vid = int(self.I[i, K.IVID])
            states = self.states()
            R = next(s for s in states if s.id == vid)
            decision = self.rsmu.plan(R, states, self.active_predictors(), t, traffic)
            record = {
                "t": round(t, 9),
                "kind": decision.kind.value,
                "R": vid,
                "R_class": R.vclass.vclass.value,
                "p": decision.p_id,
                "p_class": None,
                "t_merge": None,
                "v_merge": None,
                "x_merge": None,
                "plans": sorted(decision.plans),
            }
            if decision.released:
                if decision.p_id is not None:
                    record["p_class"] = next(s.vclass.vclass.value for s in states if s.id == decision.p_id)
                record["t_merge"] = round(decision.solved.t_merge, 9)
                record["v_merge"] = round(decision.solved.v_merge, 9)
                record["x_merge"] = round(decision.solved.x_merge, 9)
                for pid in sorted(decision.plans):
                    self.install_plan(pid, decision.plans[pid])
                self.py_events.append((t, EVENT_CODES["plan_issued"], vid, decision.p_id if decision.p_id is not None else -1, decision.solved.t_merge, 0))
            else:
                self.F[i, K.FNEXT] = t + self.config.replan_interval
                self.py_events.append((t, EVENT_CODES["plan_infeasible"], vid, -1, 0.0, len(decision.attempts)))
            self.decisions.append(record)

    def _grow_trace(self) -> None:
        for name in ("tr_k", "tr_vid", "tr_cls", "tr_lane", "tr_x", "tr_v", "tr_a"):
            arr = getattr(self, name)
            new = np.empty(arr.size * 2, arr.dtype)
            new[: arr.size] = arr
            setattr(self, name, new)

    def _grow_events(self) -> None:
        self.ev_f = np.concatenate([self.ev_f, np.empty_like(self.ev_f)])
        self.ev_i = np.concatenate([self.ev_i, np.empty_like(self.ev_i)])

    def advance(self, n_steps: int) -> None:
        """Run ``n_steps`` fixed steps."""
        k_end = self.k + n_steps
        skip = False
        while self.k < k_end:
            status, k = K.run_steps(
                self.k, k_end, skip, self.F, self.I, self.PS, self.PL, self.P,
                self.arr_t, self.arr_cls, self.arr_n, self.ptr, self.rec_f, self.rec_i,
                self.ctr, self.rng, self.tr_k, self.tr_vid, self.tr_cls, self.tr_lane,
                self.tr_x, self.tr_v, self.tr_a, self.ev_f, self.ev_i,
            )  # fmt: skip
            self.k = int(k)
            skip = False
            if status == K.ST_DONE:
                break
            if status == K.ST_PLAN:
                self._plan_requests()
                skip = True
            elif status == K.ST_TRACE_FULL:
                self._grow_trace()
            elif status == K.ST_EV_FULL:
                self._grow_events()
            elif status == K.ST_NO_SLOT:
                raise ConfigError("world capacity exhausted; raise capacity")

    # --- output -----------------------------------------------------------
    def to_trace(self) -> TraceLog:
        n = int(self.ctr[K.C_TRACE])
        cols = {
            "step": self.tr_k[:n].copy(),
            "vehicle_id": self.tr_vid[:n].copy(),
            "cls": self.tr_cls[:n].copy(),
            "lane": self.tr_lane[:n].copy(),
            "x": self.tr_x[:n].copy(),
            "v": self.tr_v[:n].copy(),
            "a": self.tr_a[:n].copy(),
        }
        ne = int(self.ctr[K.C_EV])
        rows = [
            (float(self.ev_f[e, 0]), int(self.ev_i[e, 0]), int(self.ev_i[e, 1]), int(self.ev_i[e, 2]), float(self.ev_f[e, 1]), int(self.ev_i[e, 3]))
            for e in range(ne)
        ]
        rows.extend(self.py_events)
        rows.sort(key=lambda r: (round(r[0], 9), r[1], r[2], r[3]))
        events = {
            "ev_t": np.array([r[0] for r in rows], float),
            "ev_type": np.array([r[1] for r in rows], np.int64),
            "ev_vid": np.array([r[2] for r in rows], np.int64),
            "ev_other": np.array([r[3] for r in rows], np.int64),
            "ev_value": np.array([r[4] for r in rows], float),
            "ev_extra": np.array([r[5] for r in rows], np.int64),
        }
        nv = int(self.ctr[K.C_VID])
        vehicles = {
            "spawn_t": self.rec_f[:nv, 0].copy(),
            "exit_t": self.rec_f[:nv, 1].copy(),
            "v_free": self.rec_f[:nv, 2].copy(),
            "path_length": self.rec_f[:nv, 3].copy(),
            "spawn_lane": self.rec_i[:nv, 0].copy(),
            "veh_cls": self.rec_i[:nv, 1].copy(),
        }
        return TraceLog(
            self.config.dt, self.k * self.config.dt, cols, events, vehicles, list(self.decisions), self.config.to_dict()
        )


def step(world: World, dt: float | None = None) -> World:
    """Advance ``world`` by one step in place and return it.

    ``dt`` must match the configured step when given.
    """
    if dt is not None and abs(dt - world.config.dt) > 1e-12:
        raise ConfigError("step dt must equal the configured dt")
    world.advance(1)
    return world


def run(config: ScenarioConfig) -> TraceLog:
    """Simulate one scenario and return its trace."""
    config.validate()
    world = World(config)
    world.advance(config.steps)
    return world.to_trace()
