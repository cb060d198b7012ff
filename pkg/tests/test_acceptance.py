"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines. The full
paired grid, the error-injected grid and the solver equivalence sweep are
computed once per session; together they take several minutes.
"""

from __future__ import annotations

import math
import time

import pytest

import equivalence
from coopmerge.controller.rsmu import RSMU
from coopmerge.controller.validate import validate_plan
from coopmerge.reporting.grid import PAPER_MAINLINE, PAPER_RAMP, run_grid
from coopmerge.reporting.metrics import improvement_rate, safety_summary
from coopmerge.safety import min_merge_gap, safe_spacing
from coopmerge.sim.config import ErrorInjection, ScenarioConfig
from coopmerge.sim.engine import run

SEEDS = (1, 2, 3)
CELLS = [(m, r) for m in PAPER_MAINLINE for r in PAPER_RAMP]
TABLE_ROWS = [
    (3.59, 0.97, 72.98),
    (4.79, 1.30, 72.86),
    (4.39, 1.22, 72.21),
    (6.39, 1.91, 70.11),
    (7.63, 2.14, 71.95),
    (9.78, 1.72, 82.41),
    (12.7, 2.07, 83.70),
    (17.63, 2.33, 86.78),
    (22.55, 2.20, 90.24),
]


def report(number: int, ok: bool, detail: str) -> None:
    print(f"\nCRITERION {number}: {'PASS' if ok else 'FAIL'} | {detail}")


@pytest.fixture(scope="session")
def plain_grid():
    return run_grid(ScenarioConfig(), seeds=SEEDS)


@pytest.fixture(scope="session")
def injected_grid():
    base = ScenarioConfig(error_injection=ErrorInjection(enabled=True, pos_bound=0.02, trk_bound=0.6))
    return run_grid(base, seeds=SEEDS, strategies=["preemptive"])


def test_criterion_1_formula_fidelity():
    s = safe_spacing(0.02, 0.6)
    g = min_merge_gap(1.24, 7.0)
    rates = [improvement_rate(d_nc, d_pc) for d_nc, d_pc, _ in TABLE_ROWS]
    worst = max(abs(r - want) for r, (_, _, want) in zip(rates, TABLE_ROWS))
    ok = math.isclose(s, 1.24, abs_tol=1e-12) and math.isclose(g, 9.48, abs_tol=1e-12) and worst <= 0.01
    report(1, ok, f"S_safe={s:.6f} L_safe={g:.6f} worst table deviation={worst:.4f} pp")
    assert ok


def test_criterion_2_solver_oracle_equivalence():
    t0 = time.perf_counter()
    results = [solver(n=1000) for solver in equivalence.ALL]
    wall = time.perf_counter() - t0
    parts = []
    ok = wall < 300.0
    for r in results:
        ok &= r.ok and r.feasible >= 1000
        parts.append(
            f"{r.name}: {r.feasible} feasible, {r.infeasible} infeasible, "
            f"{r.sub_grid} below grid, {len(r.mismatches)} mismatches, max err {r.max_error:.2e}"
        )
    report(2, ok, f"{wall:.0f} s; " + "; ".join(parts))
    assert ok


def test_criterion_3_safety_invariants(plain_grid, injected_grid):
    inj = [r["safety"] for r in injected_grid.runs]
    plain = [r["safety"] for r in plain_grid.runs if r["strategy"] == "preemptive"]
    collisions = sum(s["collisions"] for s in inj)
    gap_inj = min(s["min_merge_gap"] for s in inj)
    gap_plain = min(s["min_merge_gap"] for s in plain)
    floor_plain = safe_spacing(0.02, 0.6) - 2 * 0.62
    ok = (
        len(inj) == len(CELLS) * len(SEEDS)
        and collisions == 0
        and gap_inj >= 0.0
        and gap_plain >= floor_plain - 1e-9
        and sum(s["collisions"] for s in plain) == 0
    )
    report(
        3,
        ok,
        f"{len(inj)} injected runs, collisions={collisions}, min merge gap injected={gap_inj:.3f} m, "
        f"perfect tracking={gap_plain:.3f} m (floor {floor_plain:.3f}), "
        f"emergency brakes injected={sum(s['emergency_brakes'] for s in inj)}",
    )
    assert ok


def test_criterion_4_directional_trends(plain_grid):
    rows = {(r["mainline_flow"], r["ramp_flow"]): r for r in plain_grid.rows}
    lower = all(rows[c]["d_pc_mainline"] < rows[c]["d_nc_mainline"] for c in CELLS)
    above_40 = all(rows[c]["improvement_mainline"] > 40.0 for c in CELLS)
    ramp_pos = all(rows[c]["improvement_ramp"] > 0.0 for c in CELLS)
    ramp_below = all(rows[(1800.0, r)]["improvement_ramp"] < rows[(1800.0, r)]["improvement_mainline"] for r in PAPER_RAMP)
    seq = [rows[(m, 600.0)]["improvement_mainline"] for m in PAPER_MAINLINE]
    monotone = all(a <= b for a, b in zip(seq, seq[1:]))
    ok = lower and above_40 and ramp_pos and ramp_below and monotone
    report(
        4,
        ok,
        f"pc<nc everywhere={lower}, I>40% everywhere={above_40}, ramp I>0={ramp_pos}, "
        f"ramp<mainline at 1800={ramp_below}, ramp-600 sequence {['%.3f' % v for v in seq]} "
        f"non-decreasing={monotone}",
    )
    assert ok


def test_criterion_5_speed_ordering(plain_grid):
    rows = [plain_grid.row(*c) for c in CELLS]
    faster = all(r["v_pc_mainline"] >= r["v_nc_mainline"] for r in rows)
    calmer = sum(r["var_pc_mainline"] < r["var_nc_mainline"] for r in rows)
    ok = faster and calmer >= 8
    report(5, ok, f"speed pc>=nc in all cells={faster}, variance lower in {calmer}/9 cells")
    assert ok


def test_criterion_6_determinism_and_performance(plain_grid, tmp_path):
    cfg = ScenarioConfig(mainline_flow=1400, ramp_flow=600, duration=3600.0)
    a = run(cfg)
    t0 = time.perf_counter()
    b = run(cfg)
    cell_s = time.perf_counter() - t0
    same = a.save(tmp_path / "a.npz").read_bytes() == b.save(tmp_path / "b.npz").read_bytes()
    ok = same and cell_s < 10.0 and plain_grid.wall_s < 300.0
    report(6, ok, f"byte-identical={same}, 1400/600 cell {cell_s:.1f} s, paired grid {plain_grid.wall_s:.0f} s")
    assert ok


def test_criterion_7_structural_invariants(plain_grid, injected_grid, monkeypatch):
    runs = plain_grid.runs + injected_grid.runs
    cat_inner = sum(r["safety"]["cat_inner_records"] for r in runs)
    cat_lc = sum(r["safety"]["cat_lane_change_decisions"] for r in runs)

    checked, failed = 0, []
    original = RSMU.plan

    def audited(self, R, states, predictors, t, traffic=None):
        nonlocal checked
        decision = original(self, R, states, predictors, t, traffic)
        if decision.released:
            checked += 1
            bad = validate_plan(
                decision.plans,
                states,
                self.safety,
                self.layout,
                t0=t,
                predictors=predictors,
                ramp_id=R.id,
                coop_id=decision.p_id,
            )
            if bad:
                failed.append((t, R.id, bad[0]))
        return decision

    monkeypatch.setattr(RSMU, "plan", audited)
    traces = [run(ScenarioConfig(mainline_flow=m, ramp_flow=600.0)) for m in PAPER_MAINLINE]
    cat_inner += sum(safety_summary(tr)["cat_inner_records"] for tr in traces)
    ok = cat_inner == 0 and cat_lc == 0 and checked > 0 and not failed
    report(
        7,
        ok,
        f"CAT inner-lane records={cat_inner}, CAT lane-change decisions={cat_lc}, "
        f"released plans re-validated={checked}, failures={len(failed)}",
    )
    assert ok
