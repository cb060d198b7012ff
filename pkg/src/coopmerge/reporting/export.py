"""Trajectory exports: CSV, NDJSON and an SVG time-space diagram."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable

import numpy as np

from ..sim.trace import CLASS_NAMES, LANE_NAMES, TraceLog

FORMATS = ("csv", "ndjson", "svg")
HEADER = ("t", "vehicle_id", "class", "lane", "x", "v", "a")
# lanes drawn in the time-space diagram by default
DIAGRAM_LANES = ("outer", "accel", "ramp")
MAX_SEGMENTS = 200_000


def _select(trace: TraceLog, lanes: Iterable[str] | None) -> np.ndarray:
    if lanes is None:
        return np.arange(len(trace))
    codes = []
    for name in lanes:
        if name not in LANE_NAMES:
            raise ValueError(f"unknown lane {name!r}; expected one of {LANE_NAMES}")
        codes.append(LANE_NAMES.index(name))
    return np.nonzero(np.isin(trace.cols["lane"], codes))[0]


def _rows(trace: TraceLog, idx: np.ndarray):
    c = trace.cols
    t = trace.t[idx].tolist()
    vid = c["vehicle_id"][idx].tolist()
    cls = c["cls"][idx].tolist()
    lane = c["lane"][idx].tolist()
    x = c["x"][idx].tolist()
    v = c["v"][idx].tolist()
    a = c["a"][idx].tolist()
    return zip(t, vid, cls, lane, x, v, a)


def to_csv(trace: TraceLog, lanes: Iterable[str] | None = None) -> str:
    """CSV text with a header row; numbers use six decimals and ``.``."""
    out = [",".join(HEADER)]
    for t, vid, cls, lane, x, v, a in _rows(trace, _select(trace, lanes)):
        out.append(f"{t:.6f},v{vid},{CLASS_NAMES[cls]},{LANE_NAMES[lane]},{x:.6f},{v:.6f},{a:.6f}")
    return "\n".join(out) + "\n"


def to_ndjson(trace: TraceLog, lanes: Iterable[str] | None = None) -> str:
    """One JSON object per record, keys in CSV column order."""
    out = []
    for t, vid, cls, lane, x, v, a in _rows(trace, _select(trace, lanes)):
        out.append(
            f'{{"t": {t:.6f}, "vehicle_id": "v{vid}", "class": "{CLASS_NAMES[cls]}", '
            f'"lane": "{LANE_NAMES[lane]}", "x": {x:.6f}, "v": {v:.6f}, "a": {a:.6f}}}'
        )
    return "".join(line + "\n" for line in out)


def parse_csv(text: str, dt: float = 0.1) -> TraceLog:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != HEADER:
        raise ValueError(f"expected header {','.join(HEADER)}")
    recs = [(float(t), vid, c, lane, float(x), float(v), float(a)) for t, vid, c, lane, x, v, a in reader]
    return TraceLog.from_records(recs, dt)


def parse_ndjson(text: str, dt: float = 0.1) -> TraceLog:
    recs = []
    for line in text.splitlines():
        if not line.strip():
            continue
        r = json.loads(line)
        recs.append(tuple(r[k] for k in HEADER))
    return TraceLog.from_records(recs, dt)


def time_space_svg(trace: TraceLog, lanes: Iterable[str] | None = DIAGRAM_LANES, max_segments: int = MAX_SEGMENTS) -> str:
    """Position-over-time diagram with speed as the line colour.

    Long traces are thinned to at most ``max_segments`` line segments by
    keeping every n-th step.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.collections import LineCollection

    idx = _select(trace, lanes)
    step = trace.cols["step"][idx]
    stride = max(1, int(np.ceil(idx.size / max_segments)))
    if stride > 1:
        keep = step % stride == 0
        idx, step = idx[keep], step[keep]
    vid = trace.cols["vehicle_id"][idx]
    order = np.lexsort((step, vid))
    idx, step, vid = idx[order], step[order], vid[order]
    t = trace.t[idx]
    x = trace.cols["x"][idx]
    v = trace.cols["v"][idx]
    # join consecutive samples of the same vehicle only
    link = (vid[1:] == vid[:-1]) & (step[1:] - step[:-1] == stride)
    segs = np.stack([np.column_stack([t[:-1], x[:-1]]), np.column_stack([t[1:], x[1:]])], axis=1)[link]

    fig, ax = plt.subplots(figsize=(10, 5))
    lc = LineCollection(segs, cmap="RdYlGn", linewidths=0.6)
    lc.set_array(v[:-1][link])
    if segs.shape[0]:
        lc.set_clim(0.0, max(float(v.max()), 1.0))
    ax.add_collection(lc)
    if t.size:
        ax.set_xlim(float(t.min()), float(t.max()))
        ax.set_ylim(float(x.min()), float(x.max()))
    ax.set_xlabel("Time (s)")
    ax.set_ylabel("Position (m)")
    cb = fig.colorbar(lc, ax=ax)
    cb.set_label("Speed (m/s)")
    fig.tight_layout()
    buf = io.StringIO()
    with matplotlib.rc_context({"svg.hashsalt": "coopmerge"}):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def export_trajectories(trace: TraceLog, fmt: str, path: str | Path, lanes: Iterable[str] | None = None) -> Path:
    """Write ``trace`` to ``path`` as CSV, NDJSON or SVG.

    Args:
        trace: Simulation output.
        fmt: One of ``csv``, ``ndjson``, ``svg``.
        path: Destination file.
        lanes: Lane names to keep; ``None`` keeps every record (CSV and
            NDJSON) or the outer lane plus the ramp (SVG).

    Raises:
        OSError: the destination cannot be written.
    """
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    if fmt == "csv":
        text = to_csv(trace, lanes)
    elif fmt == "ndjson":
        text = to_ndjson(trace, lanes)
    else:
        text = time_space_svg(trace, DIAGRAM_LANES if lanes is None else lanes)
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path
