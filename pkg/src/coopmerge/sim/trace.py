"""Columnar trajectory and event log produced by a simulation run."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..core import Lane

EVENT_NAMES = {
    1: "lane_change",
    2: "merge",
    3: "forced_stop",
    4: "conflict",
    5: "collision",
    6: "emergency_brake",
    7: "plan_break",
    8: "plan_done",
    9: "plan_issued",
    10: "plan_infeasible",
}
EVENT_CODES = {v: k for k, v in EVENT_NAMES.items()}
CLASS_NAMES = ("CAV", "CAT")
LANE_NAMES = tuple(l.name.lower() for l in Lane)

_TRACE_COLS = ("step", "vehicle_id", "cls", "lane", "x", "v", "a")
_EVENT_COLS = ("ev_t", "ev_type", "ev_vid", "ev_other", "ev_value", "ev_extra")
_VEH_COLS = ("spawn_t", "exit_t", "v_free", "path_length", "spawn_lane", "veh_cls")


def _empty_trace():
    return {
        "step": np.empty(0, np.int32),
        "vehicle_id": np.empty(0, np.int32),
        "cls": np.empty(0, np.int8),
        "lane": np.empty(0, np.int8),
        "x": np.empty(0),
        "v": np.empty(0),
        "a": np.empty(0),
    }


@dataclass
class TraceLog:
    """Per-step vehicle records, events and per-vehicle entry/exit data.

    Records are ordered by ``(t, vehicle_id)``; ``t = step * dt`` is the end
    of the step that produced the state. Vehicle ids index the per-vehicle
    arrays directly. ``exit_t`` is NaN for vehicles still present at the end.
    """

    dt: float = 0.1
    duration: float = 0.0
    cols: dict = field(default_factory=_empty_trace)
    events: dict = field(default_factory=dict)
    vehicles: dict = field(default_factory=dict)
    decisions: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.events:
            self.events = {
                "ev_t": np.empty(0),
                "ev_type": np.empty(0, np.int64),
                "ev_vid": np.empty(0, np.int64),
                "ev_other": np.empty(0, np.int64),
                "ev_value": np.empty(0),
                "ev_extra": np.empty(0, np.int64),
            }
        if not self.vehicles:
            self.vehicles = {
                "spawn_t": np.empty(0),
                "exit_t": np.empty(0),
                "v_free": np.empty(0),
                "path_length": np.empty(0),
                "spawn_lane": np.empty(0, np.int64),
                "veh_cls": np.empty(0, np.int64),
            }

    # --- record access -------------------------------------------------
    def __len__(self) -> int:
        return int(self.cols["step"].size)

    @property
    def t(self) -> np.ndarray:
        return np.round(self.cols["step"].astype(np.float64) * self.dt, 9)

    @property
    def n_vehicles(self) -> int:
        return int(self.vehicles["spawn_t"].size)

    def records(self):
        """Yield ``(t, vehicle_id, class, lane, x, v, a)`` tuples in order."""
        c = self.cols
        t = self.t
        for r in range(len(self)):
            yield (
                float(t[r]),
                int(c["vehicle_id"][r]),
                CLASS_NAMES[c["cls"][r]],
                LANE_NAMES[c["lane"][r]],
                float(c["x"][r]),
                float(c["v"][r]),
                float(c["a"][r]),
            )

    @classmethod
    def from_records(cls, records, dt: float = 0.1) -> "TraceLog":
        """Build a trace from ``(t, vehicle_id, class, lane, x, v, a)`` tuples."""
        records = list(records)
        cols = _empty_trace()
        if records:
            t, vid, c, lane, x, v, a = zip(*records)
            cols["step"] = np.round(np.asarray(t, float) / dt).astype(np.int32)
            cols["vehicle_id"] = np.asarray([_parse_vid(i) for i in vid], np.int32)
            cols["cls"] = np.asarray([CLASS_NAMES.index(k) for k in c], np.int8)
            cols["lane"] = np.asarray([LANE_NAMES.index(k) for k in lane], np.int8)
            cols["x"] = np.asarray(x, float)
            cols["v"] = np.asarray(v, float)
            cols["a"] = np.asarray(a, float)
        return cls(dt=dt, cols=cols)

    # --- events -----------------------------------------------------------
    def event_mask(self, name: str) -> np.ndarray:
        return self.events["ev_type"] == EVENT_CODES[name]

    def count(self, name: str) -> int:
        return int(self.event_mask(name).sum())

    def event_list(self, name: str | None = None) -> list[dict]:
        e = self.events
        mask = np.ones(e["ev_t"].size, bool) if name is None else self.event_mask(name)
        out = []
        for r in np.nonzero(mask)[0]:
            out.append(
                {
                    "t": float(e["ev_t"][r]),
                    "type": EVENT_NAMES[int(e["ev_type"][r])],
                    "vehicle_id": int(e["ev_vid"][r]),
                    "other_id": int(e["ev_other"][r]),
                    "value": float(e["ev_value"][r]),
                    "extra": int(e["ev_extra"][r]),
                }
            )
        return out

    # --- persistence ------------------------------------------------------
    def save(self, path: str | Path) -> Path:
        path = Path(path)
        meta = {
            "dt": self.dt,
            "duration": self.duration,
            "decisions": self.decisions,
            "config": self.config,
        }
        arrays = {**self.cols, **self.events, **self.vehicles}
        with open(path, "wb") as fh:
            np.savez_compressed(fh, meta=np.frombuffer(json.dumps(meta, sort_keys=True).encode(), np.uint8), **arrays)
        return path

    @classmethod
    def load(cls, path: str | Path) -> "TraceLog":
        with np.load(Path(path)) as z:
            meta = json.loads(bytes(z["meta"]).decode())
            cols = {k: z[k] for k in _TRACE_COLS}
            events = {k: z[k] for k in _EVENT_COLS}
            vehicles = {k: z[k] for k in _VEH_COLS}
        return cls(meta["dt"], meta["duration"], cols, events, vehicles, meta["decisions"], meta["config"])

    def digest(self) -> str:
        """SHA-256 over every record, event and vehicle array."""
        h = hashlib.sha256()
        for group in (self.cols, self.events, self.vehicles):
            for key in sorted(group):
                arr = np.ascontiguousarray(group[key])
                h.update(key.encode())
                h.update(str(arr.dtype).encode())
                h.update(arr.tobytes())
        h.update(json.dumps(self.decisions, sort_keys=True).encode())
        return h.hexdigest()


def _parse_vid(v) -> int:
    if isinstance(v, str):
        return int(v.lstrip("v"))
    return int(v)
