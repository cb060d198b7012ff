"""Paired scenario grid: both strategies over flow combinations and seeds."""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import UndefinedRate
from ..sim.config import ScenarioConfig, Strategy
from ..sim.engine import run
from .metrics import compute_metrics, improvement_rate, safety_summary

PAPER_MAINLINE = (1000.0, 1400.0, 1800.0)
PAPER_RAMP = (300.0, 500.0, 600.0)


def _run_one(cfg: ScenarioConfig) -> dict:
    t0 = time.perf_counter()
    trace = run(cfg)
    wall = time.perf_counter() - t0
    return {
        "mainline_flow": cfg.mainline_flow,
        "ramp_flow": cfg.ramp_flow,
        "seed": cfg.seed,
        "strategy": cfg.strategy.value,
        "metrics": compute_metrics(trace).to_dict(),
        "safety": safety_summary(trace),
        "wall_s": wall,
    }


def _mean(values) -> float:
    vals = [v for v in values if not math.isnan(v)]
    return float(np.mean(vals)) if vals else float("nan")


def _rate(d_nc: float, d_pc: float) -> float:
    try:
        return improvement_rate(d_nc, d_pc)
    except UndefinedRate:
        return float("nan")


@dataclass
class GridReport:
    """Per-run results plus seed-averaged rows, one per (mainline, ramp) cell."""

    runs: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    wall_s: float = 0.0

    def cell_runs(self, mainline: float, ramp: float, strategy: str) -> list[dict]:
        return [
            r for r in self.runs if r["mainline_flow"] == mainline and r["ramp_flow"] == ramp and r["strategy"] == strategy
        ]

    def row(self, mainline: float, ramp: float) -> dict:
        for r in self.rows:
            if r["mainline_flow"] == mainline and r["ramp_flow"] == ramp:
                return r
        raise KeyError((mainline, ramp))

    def to_json(self) -> str:
        return json.dumps({"rows": self.rows, "runs": self.runs, "wall_s": self.wall_s}, indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = []
        for pop in ("mainline", "ramp"):
            lines.append(f"{pop} vehicles")
            lines.append(f"{'mainline':>9} {'ramp':>6} {'d_nc (s)':>10} {'d_pc (s)':>10} {'I (%)':>8}")
            for r in self.rows:
                lines.append(
                    f"{r['mainline_flow']:>9.0f} {r['ramp_flow']:>6.0f} "
                    f"{r[f'd_nc_{pop}']:>10.2f} {r[f'd_pc_{pop}']:>10.2f} {r[f'improvement_{pop}']:>8.2f}"
                )
            lines.append("")
        return "\n".join(lines)


def _summarise(runs: list[dict], cells) -> list[dict]:
    rows = []
    for m, r in cells:
        row = {"mainline_flow": m, "ramp_flow": r}
        for tag, strat in (("nc", Strategy.UNCONTROLLED.value), ("pc", Strategy.PREEMPTIVE.value)):
            rs = [x for x in runs if x["mainline_flow"] == m and x["ramp_flow"] == r and x["strategy"] == strat]
            row[f"n_seeds_{tag}"] = len(rs)
            for key, out in (
                ("avg_delay_mainline", "d_{}_mainline"),
                ("avg_delay_ramp", "d_{}_ramp"),
                ("avg_speed_mainline", "v_{}_mainline"),
                ("speed_variance_mainline", "var_{}_mainline"),
            ):
                row[out.format(tag)] = _mean([x["metrics"][key] for x in rs])
            row[f"collisions_{tag}"] = sum(x["safety"]["collisions"] for x in rs)
        for pop in ("mainline", "ramp"):
            row[f"improvement_{pop}"] = _rate(row[f"d_nc_{pop}"], row[f"d_pc_{pop}"])
        rows.append(row)
    return rows


def run_grid(
    base: ScenarioConfig,
    mainline_flows: Sequence[float] = PAPER_MAINLINE,
    ramp_flows: Sequence[float] = PAPER_RAMP,
    seeds: Sequence[int] = (1, 2, 3),
    strategies: Sequence[Strategy | str] = (Strategy.UNCONTROLLED, Strategy.PREEMPTIVE),
    workers: int = 1,
) -> GridReport:
    """Run every (cell, seed, strategy) combination and average over seeds.

    Paired runs differ only in strategy. Results are reduced in sorted cell
    order so the report does not depend on scheduling.

    Args:
        base: Configuration supplying everything except flows, seed and strategy.
        workers: Worker processes; 1 runs in-process.
    """
    cells = sorted({(float(m), float(r)) for m in mainline_flows for r in ramp_flows})
    strategies = [Strategy(s) for s in strategies]
    jobs = [
        base.replace(mainline_flow=m, ramp_flow=r, seed=int(s), strategy=st)
        for m, r in cells
        for s in sorted(seeds)
        for st in strategies
    ]
    t0 = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            runs = list(pool.map(_run_one, jobs))
    else:
        runs = [_run_one(j) for j in jobs]
    runs.sort(key=lambda x: (x["mainline_flow"], x["ramp_flow"], x["seed"], x["strategy"]))
    return GridReport(runs, _summarise(runs, cells), time.perf_counter() - t0)
