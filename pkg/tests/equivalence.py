"""Randomised solver-versus-oracle comparison shared by the solver tests and the acceptance run."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

import oracles
from coopmerge.controller import solvers
from coopmerge.core import RoadLayout
from coopmerge.errors import InfeasibleCase
from coopmerge.safety import SafetyParams

AGREE_TOL = 2e-3  # m/s^2
SAFETY = SafetyParams()
LAYOUT = RoadLayout()
S = SAFETY.S_safe


@dataclass
class Agreement:
    name: str
    feasible: int = 0
    infeasible: int = 0
    max_error: float = 0.0
    # solver answers the oracle grid cannot represent: the feasible set is
    # narrower than one grid step, yet the integrated check accepts the value
    sub_grid: int = 0
    mismatches: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches and self.max_error <= AGREE_TOL

    def record(self, instance, solver_value, oracle_value, verified=False):
        if solver_value is not None and oracle_value is None and verified:
            self.sub_grid += 1
            return
        if (solver_value is None) != (oracle_value is None):
            self.mismatches.append((instance, solver_value, oracle_value))
            return
        if solver_value is None:
            self.infeasible += 1
            return
        self.feasible += 1
        err = float(np.max(np.abs(np.subtract(solver_value, oracle_value))))
        self.max_error = max(self.max_error, err)
        if err > AGREE_TOL:
            self.mismatches.append((instance, solver_value, oracle_value))


def _call(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except InfeasibleCase:
        return None


def _run(name, draw, solve, oracle, verify, n_feasible, seed, max_draws):
    rng = np.random.default_rng(seed)
    rep = Agreement(name)
    for _ in range(max_draws):
        if rep.feasible >= n_feasible:
            break
        inst = draw(rng)
        got, want = solve(**inst), oracle(**inst)
        checked = got is not None and want is None and verify(inst, got)
        rep.record(inst, got, want, checked)
    return rep


# --- follower deceleration -------------------------------------------------
def _draw_follower(rng):
    S_p = rng.uniform(20.0, 200.0)
    v_p = rng.uniform(15.0, 27.0)
    L_p = rng.choice([5.0, 7.0])
    return dict(
        S_p=S_p,
        S_q1=S_p + L_p + rng.uniform(-2.0, 30.0),
        v_p=v_p,
        v_q1=rng.uniform(15.0, 32.0),
        t=rng.uniform(0.2, 1.0) * S_p / v_p,
        L_p=L_p,
        decel_max=rng.choice([4.5, 4.0]),
    )


def _solve_follower(S_p, S_q1, v_p, v_q1, t, L_p, decel_max):
    return _call(solvers.solve_follower_decel, S_p, S_q1, v_p, v_q1, t, SAFETY, L_p=L_p, decel_max=decel_max)


def _oracle_follower(S_p, S_q1, v_p, v_q1, t, L_p, decel_max):
    return oracles.follower_decel(S_p, S_q1, v_p, v_q1, t, S, L_p, decel_max)


def _verify_follower(inst, a):
    i = inst
    return a <= i["decel_max"] and oracles._follower_ok(a, i["S_p"], i["S_q1"], i["v_p"], i["v_q1"], i["t"], S, i["L_p"])


def follower_decel(n=1000, seed=11, max_draws=20000):
    return _run("follower_decel", _draw_follower, _solve_follower, _oracle_follower, _verify_follower, n, seed, max_draws)


# --- leader acceleration ---------------------------------------------------
def _draw_leader(rng):
    S_p = rng.uniform(30.0, 200.0)
    v_p = rng.uniform(15.0, 27.0)
    L_q = rng.choice([5.0, 7.0])
    L_p = 5.0
    S_q = S_p - L_q - rng.uniform(0.0, S)  # front gap below S_safe
    S_q1 = S_p + L_p + rng.uniform(S, 25.0)  # rear gap at least S_safe
    return dict(
        S_p=S_p,
        S_q=S_q,
        S_q1=S_q1,
        v_p=v_p,
        v_q=rng.uniform(14.0, 28.0),
        v_q1=rng.uniform(15.0, 32.0),
        t=rng.uniform(0.05, 1.0) * S_p / v_p,
        L_q=L_q,
        L_p=L_p,
        a_safe=rng.uniform(0.5, 2.5),
    )


def _solve_leader(S_p, S_q, S_q1, v_p, v_q, v_q1, t, L_q, L_p, a_safe):
    out = _call(solvers.solve_leader_accel, S_p, S_q, S_q1, v_p, v_q, v_q1, SAFETY, L_q=L_q, L_p=L_p, a_safe=a_safe, t_q=t)
    return None if out is None else out[0]


def _oracle_leader(S_p, S_q, S_q1, v_p, v_q, v_q1, t, L_q, L_p, a_safe):
    return oracles.leader_accel(S_p, S_q, S_q1, v_p, v_q, v_q1, t, S, L_q, L_p, a_safe)


def _verify_leader(inst, a):
    i = inst
    if a > i["a_safe"] or not oracles.leader_time_admissible(i["S_p"], i["S_q1"], i["v_p"], i["v_q1"], i["t"], S, i["L_p"]):
        return False
    return oracles._leader_ok(a, i["S_p"], i["S_q"], i["v_p"], i["v_q"], i["t"], S, i["L_q"])


def leader_accel(n=1000, seed=12, max_draws=20000):
    return _run("leader_accel", _draw_leader, _solve_leader, _oracle_leader, _verify_leader, n, seed, max_draws)


# --- post-lane-change gap fix ----------------------------------------------
def _draw_gapfix(rng):
    t_r = rng.uniform(3.0, 40.0)
    x_R = rng.uniform(20.0, 200.0)
    L_R = rng.choice([5.0, 7.0])
    inst = dict(x_R=x_R, L_R=L_R, t_r=t_r, lead=None, rear=None)
    if rng.random() < 0.8:
        v = rng.uniform(15.0, 28.0)
        length = rng.choice([5.0, 7.0])
        gap = rng.uniform(-6.0, 4.0)
        inst["lead"] = (x_R + length + gap - v * t_r, v, length, rng.choice([2.5, 1.5]))
    if rng.random() < 0.8:
        v = rng.uniform(15.0, 28.0)
        gap = rng.uniform(-40.0, 4.0)
        inst["rear"] = (x_R - L_R - gap - v * t_r, v, rng.choice([4.5, 4.0]))
    return inst


def _solve_gapfix(x_R, L_R, t_r, lead, rear):
    fix = _call(solvers.post_lane_change_gap_fix, x_R, L_R, t_r, SAFETY, p_minus1=lead, p_plus1=rear)
    if fix is None:
        return None
    return (fix.a_p_minus1 or 0.0, fix.a_decel_p1 or 0.0)


def _oracle_gapfix(x_R, L_R, t_r, lead, rear):
    a = b = 0.0
    if lead is not None:
        a = oracles.lead_fix(*lead, x_R, t_r, S)
    if rear is not None:
        b = oracles.rear_fix(*rear, x_R, L_R, t_r, S)
    if a is None or b is None:
        return None
    return (a, b)


def _verify_gapfix(inst, ab):
    a, b = ab
    x_R, L_R, t_r = inst["x_R"], inst["L_R"], inst["t_r"]
    if inst["lead"] is not None:
        x, v, length, accel_max = inst["lead"]
        if a > accel_max or not oracles._lead_fix_ok(a, x, v, length, x_R, t_r, S):
            return False
    if inst["rear"] is not None:
        x, v, decel_max = inst["rear"]
        if b > decel_max or not oracles._rear_fix_ok(b, x, v, x_R, L_R, t_r, S):
            return False
    return True


def gap_fix(n=1000, seed=13, max_draws=20000):
    return _run("post_lane_change_gap_fix", _draw_gapfix, _solve_gapfix, _oracle_gapfix, _verify_gapfix, n, seed, max_draws)


# --- cooperative acceleration of p -------------------------------------------
def _draw_coop(rng):
    x_R = rng.uniform(-300.0, -30.0)
    v0 = rng.uniform(12.0, 18.0)
    v_p = rng.uniform(v0 + 1.0, 27.0)
    # place p near the slot it would occupy at the merge
    t_guess = -x_R / v0 + (v_p - v0) / 1.5
    x_p = x_R - v_p * t_guess + v0 * t_guess + rng.uniform(-20.0, 140.0)
    inst = dict(
        x_R=x_R,
        v0=v0,
        a_r=rng.uniform(0.8, 2.5),
        x_p=x_p,
        v_p=v_p,
        L_p=5.0,
        L_R=rng.choice([5.0, 7.0]),
        accel_max_p=2.5,
        p_plus1=None,
    )
    if rng.random() < 0.5:
        inst["p_plus1"] = (x_p - 5.0 - rng.uniform(2.0, 60.0), rng.uniform(18.0, 28.0))
    return inst


def _solve_coop(x_R, v0, a_r, x_p, v_p, L_p, L_R, accel_max_p, p_plus1):
    try:
        res = solvers.solve_coop_accel(
            x_R, v0, a_r, x_p, v_p, LAYOUT, SAFETY, L_p=L_p, L_R=L_R, accel_max_p=accel_max_p, p_plus1=p_plus1
        )
    except InfeasibleCase:
        return None
    return res.a_accel_p


def _oracle_coop(x_R, v0, a_r, x_p, v_p, L_p, L_R, accel_max_p, p_plus1):
    return oracles.coop_accel(
        x_R, v0, a_r, x_p, v_p, LAYOUT.L_b, LAYOUT.v_lim_min, LAYOUT.v_lim_max, S, L_p, L_R, accel_max_p, p_plus1
    )


def _verify_coop(inst, a):
    i = inst
    ok = oracles.coop_checker(
        i["x_R"], i["v0"], i["a_r"], i["x_p"], i["v_p"], LAYOUT.L_b, LAYOUT.v_lim_min, LAYOUT.v_lim_max,
        S, i["L_p"], i["L_R"], i["p_plus1"],
    )
    return a <= i["accel_max_p"] and ok(a)


def coop_accel(n=1000, seed=14, max_draws=20000):
    return _run("coop_accel", _draw_coop, _solve_coop, _oracle_coop, _verify_coop, n, seed, max_draws)


# --- ramp acceleration adjustment ------------------------------------------
def _draw_ramp(rng):
    x_R = rng.uniform(-300.0, -20.0)
    v0 = rng.uniform(12.0, 18.0)
    v_p = rng.uniform(16.0, 28.5)
    cat = rng.random() < 0.5
    a_max = 1.5 if cat else 2.5
    L_p = rng.choice([5.0, 7.0])
    # place p around the slot that the fastest admissible merge would need
    t_r = -x_R / v0 + (v_p - v0) / a_max
    x_m = (v_p * v_p - v0 * v0) / (2.0 * a_max)
    x_p = x_m + L_p + S - v_p * t_r + rng.uniform(-60.0, 60.0)
    inst = dict(
        x_R=x_R,
        v0=v0,
        x_p=x_p,
        v_p=v_p,
        L_p=L_p,
        L_R=7.0 if cat else 5.0,
        accel_min=0.0,
        accel_max=a_max,
        p_plus1=None,
    )
    if rng.random() < 0.5:
        inst["p_plus1"] = (x_p - L_p - rng.uniform(5.0, 80.0), rng.uniform(18.0, 28.0), 4.5)
    return inst


def _solve_ramp(x_R, v0, x_p, v_p, L_p, L_R, accel_min, accel_max, p_plus1):
    try:
        res = solvers.solve_ramp_accel_adjust(
            x_R, v0, x_p, v_p, LAYOUT, SAFETY, L_p=L_p, L_R=L_R, accel_min=accel_min, accel_max=accel_max, p_plus1=p_plus1
        )
    except InfeasibleCase:
        return None
    return (res.a_ramp, res.a_decel_p1 or 0.0)


def _oracle_ramp(x_R, v0, x_p, v_p, L_p, L_R, accel_min, accel_max, p_plus1):
    return oracles.ramp_adjust(
        x_R, v0, x_p, v_p, LAYOUT.L_b, LAYOUT.v_lim_min, LAYOUT.v_lim_max, S, L_p, L_R, accel_min, accel_max, p_plus1
    )


def _verify_ramp(inst, ab):
    a, b = ab
    i = inst
    if not i["accel_min"] <= a <= i["accel_max"]:
        return False
    if not oracles.ramp_checker(i["x_R"], i["v0"], i["x_p"], i["v_p"], LAYOUT.L_b, S, i["L_p"])(a):
        return False
    if i["p_plus1"] is None:
        return True
    x_m, t_r = oracles.ramp_merge_state(a, i["x_R"], i["v0"], i["v_p"])
    x1, v1, decel_max = i["p_plus1"]
    return b <= decel_max and oracles._rear_fix_ok(b, x1, v1, x_m, i["L_R"], t_r, S)


def ramp_adjust(n=1000, seed=15, max_draws=20000):
    return _run("ramp_accel_adjust", _draw_ramp, _solve_ramp, _oracle_ramp, _verify_ramp, n, seed, max_draws)


ALL = (follower_decel, leader_accel, gap_fix, coop_accel, ramp_adjust)
