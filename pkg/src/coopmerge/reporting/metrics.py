"""Delay, speed and improvement metrics computed from a :class:`TraceLog`."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..core import Lane
from ..errors import NoVehicles, UndefinedRate
from ..sim.trace import TraceLog

POPULATIONS = ("mainline", "ramp", "all")


def _population_mask(spawn_lane: np.ndarray, population: str) -> np.ndarray:
    if population == "mainline":
        return (spawn_lane == int(Lane.INNER)) | (spawn_lane == int(Lane.OUTER))
    if population == "ramp":
        return spawn_lane == int(Lane.RAMP)
    if population == "all":
        return np.ones(spawn_lane.shape, bool)
    raise ValueError(f"unknown population {population!r}; expected one of {POPULATIONS}")


def vehicle_delays(trace: TraceLog, population: str = "mainline", warmup: float = 0.0, L=None, v_free=None) -> np.ndarray:
    """Per-vehicle delay ``t_act - L / v_free`` for completed trips.

    Args:
        trace: Simulation output.
        population: ``"mainline"``, ``"ramp"`` or ``"all"`` by spawn lane.
        warmup: Vehicles spawned before this time are ignored.
        L: Path length override (scalar or per-vehicle array). Defaults to
            each vehicle's recorded entry-to-exit distance.
        v_free: Free-flow speed override (scalar or per-vehicle array).
            Defaults to the recorded desired speed at spawn.

    Returns:
        Delays of the vehicles that exited, in id order.
    """
    veh = trace.vehicles
    spawn = veh["spawn_t"]
    exit_t = veh["exit_t"]
    L = veh["path_length"] if L is None else np.broadcast_to(np.asarray(L, float), spawn.shape)
    v_free = veh["v_free"] if v_free is None else np.broadcast_to(np.asarray(v_free, float), spawn.shape)
    mask = _population_mask(veh["spawn_lane"], population) & np.isfinite(exit_t) & (spawn >= warmup)
    return (exit_t[mask] - spawn[mask]) - L[mask] / v_free[mask]


def average_delay(trace: TraceLog, population: str = "mainline", warmup: float = 0.0, L=None, v_free=None) -> float:
    """Mean delay of a population; see :func:`vehicle_delays`.

    Raises:
        NoVehicles: no vehicle of the population completed its trip.
    """
    d = vehicle_delays(trace, population, warmup, L, v_free)
    if d.size == 0:
        raise NoVehicles(f"no completed {population} trips")
    return float(d.mean())


def _record_mask(trace: TraceLog, interval, population: str) -> np.ndarray:
    t = trace.t
    t1, t2 = interval if interval is not None else (-np.inf, np.inf)
    if t1 > t2:
        raise ValueError("interval start after its end")
    lanes = trace.vehicles["spawn_lane"]
    vid = trace.cols["vehicle_id"]
    if lanes.size:
        pop = _population_mask(lanes, population)[vid]
    else:
        # traces built from bare records carry no vehicle table
        pop = np.ones(vid.shape, bool)
    return pop & (t >= t1) & (t <= t2)


def average_speed(trace: TraceLog, interval=None, population: str = "mainline") -> float:
    """Time-mean of instantaneous speeds observed in ``[t1, t2]``.

    Raises:
        NoVehicles: nothing was observed.
    """
    m = _record_mask(trace, interval, population)
    if not m.any():
        raise NoVehicles("no speed samples in the interval")
    return float(trace.cols["v"][m].mean())


def speed_series(trace: TraceLog, bin_width: float = 60.0, start: float = 0.0, population: str = "mainline") -> np.ndarray:
    """Mean speed per consecutive ``bin_width`` interval from ``start``.

    Bins without samples are dropped.
    """
    m = _record_mask(trace, (start, np.inf), population)
    t = trace.t[m]
    v = trace.cols["v"][m]
    if t.size == 0:
        return np.empty(0)
    # records at t = start + k*w belong to bin k-1 (end-of-step stamps)
    b = np.ceil(np.round((t - start) / bin_width, 9)).astype(np.int64) - 1
    b = np.maximum(b, 0)
    sums = np.bincount(b, weights=v)
    counts = np.bincount(b)
    keep = counts > 0
    return sums[keep] / counts[keep]


def speed_variance(trace: TraceLog, bin_width: float = 60.0, start: float = 0.0, population: str = "mainline") -> float:
    """Sample variance of :func:`speed_series`; NaN with fewer than two bins."""
    s = speed_series(trace, bin_width, start, population)
    return float(np.var(s, ddof=1)) if s.size > 1 else float("nan")


def improvement_rate(d_nc: float, d_pc: float) -> float:
    """Percentage delay reduction of a controlled run against its baseline.

    Raises:
        UndefinedRate: ``d_nc <= 0``.
    """
    if not d_nc > 0:
        raise UndefinedRate(f"baseline delay must be positive, got {d_nc}")
    return (1.0 - d_pc / d_nc) * 100.0


@dataclass
class Metrics:
    avg_delay_mainline: float
    avg_delay_ramp: float
    avg_speed_mainline: float
    avg_speed_ramp: float
    speed_variance_mainline: float
    conflict_count: int
    collision_count: int
    emergency_brake_count: int
    forced_stop_count: int
    n_mainline: int
    n_ramp: int
    mainline_flow: float
    ramp_flow: float
    cat_share: float
    seed: int
    strategy: str

    def to_dict(self) -> dict:
        return asdict(self)


def _safe(fn, *args, **kw) -> float:
    try:
        return fn(*args, **kw)
    except NoVehicles:
        return float("nan")


def compute_metrics(trace: TraceLog, warmup: float | None = None, bin_width: float = 60.0) -> Metrics:
    """Summarise one run. Empty populations yield NaN rather than raising."""
    cfg = trace.config
    if warmup is None:
        warmup = float(cfg.get("warmup", 0.0))
    horizon = (warmup, np.inf)
    return Metrics(
        avg_delay_mainline=_safe(average_delay, trace, "mainline", warmup),
        avg_delay_ramp=_safe(average_delay, trace, "ramp", warmup),
        avg_speed_mainline=_safe(average_speed, trace, horizon, "mainline"),
        avg_speed_ramp=_safe(average_speed, trace, horizon, "ramp"),
        speed_variance_mainline=speed_variance(trace, bin_width, warmup, "mainline"),
        conflict_count=trace.count("conflict"),
        collision_count=trace.count("collision"),
        emergency_brake_count=trace.count("emergency_brake"),
        forced_stop_count=trace.count("forced_stop"),
        n_mainline=int(vehicle_delays(trace, "mainline", warmup).size),
        n_ramp=int(vehicle_delays(trace, "ramp", warmup).size),
        mainline_flow=float(cfg.get("mainline_flow", np.nan)),
        ramp_flow=float(cfg.get("ramp_flow", np.nan)),
        cat_share=float(cfg.get("cat_share", np.nan)),
        seed=int(cfg.get("seed", -1)),
        strategy=str(cfg.get("strategy", "")),
    )


_LANE_CHANGE_KINDS = ("DirectLaneChange", "LaneChangeFollowerDecel", "LaneChangeLeaderAccel")


def safety_summary(trace: TraceLog) -> dict:
    """Safety and structural indicators of one run.

    Gap minima are ``inf`` when no event of that kind occurred.
    """
    e = trace.events

    def _min(name, extra=None):
        m = trace.event_mask(name)
        if extra is not None:
            m &= e["ev_extra"] == extra
        return float(e["ev_value"][m].min()) if m.any() else float("inf")

    c = trace.cols
    return {
        "collisions": trace.count("collision"),
        "conflicts": trace.count("conflict"),
        "emergency_brakes": trace.count("emergency_brake"),
        "plan_breaks": trace.count("plan_break"),
        "min_conflict_gap": _min("conflict"),
        "min_merge_gap_planned": _min("merge", 1),
        "min_merge_gap": _min("merge"),
        "cat_inner_records": int(np.count_nonzero((c["cls"] == 1) & (c["lane"] == int(Lane.INNER)))),
        "cat_lane_change_decisions": sum(
            1 for d in trace.decisions if d["kind"] in _LANE_CHANGE_KINDS and d.get("p_class") == "CAT"
        ),
        "released": sum(1 for d in trace.decisions if d["kind"] != "Infeasible"),
        "infeasible": sum(1 for d in trace.decisions if d["kind"] == "Infeasible"),
    }
