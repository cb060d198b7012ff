import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coopmerge.core import (
    CAT,
    CAV,
    CompiledPlan,
    Lane,
    RoadLayout,
    Segment,
    TrajectoryPlan,
    VehicleState,
    advance_arrays,
    advance_constant_accel,
    bumper_gap,
    plan_state_at,
)


def _oracle_advance(x, v, a, dt, h=1e-4):
    # explicit small-step integration with the stop clamp
    n = int(round(dt / h))
    for _ in range(n):
        if v + a * h < 0:
            return x + v * v / (-2 * a), 0.0
        x += v * h + 0.5 * a * h * h
        v += a * h
    return x, v


@pytest.mark.parametrize(
    "args, expected",
    [
        ((0.0, 10.0, 0.0, 2.0), (20.0, 10.0)),
        ((0.0, 10.0, 1.0, 2.0), (22.0, 12.0)),
        ((0.0, 2.0, -4.0, 1.0), (0.5, 0.0)),
    ],
)
def test_advance_examples(args, expected):
    x, v = advance_constant_accel(*args)
    assert x == pytest.approx(expected[0], abs=1e-12)
    assert v == pytest.approx(expected[1], abs=1e-12)
    xo, vo = _oracle_advance(*args)
    assert x == pytest.approx(xo, abs=1e-6)
    assert v == pytest.approx(vo, abs=1e-6)


def test_advance_rejects_negative_dt():
    with pytest.raises(ValueError):
        advance_constant_accel(0.0, 1.0, 0.0, -0.1)


@given(
    st.floats(-1000, 1000),
    st.floats(0, 40),
    st.floats(-8, 3),
    st.floats(0, 30),
)
def test_advance_never_reverses(x, v, a, dt):
    x1, v1 = advance_constant_accel(x, v, a, dt)
    assert v1 >= 0.0
    assert x1 >= x - 1e-9


@given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(0, 40), st.floats(-8, 3), st.floats(0, 10)), min_size=1, max_size=20))
def test_advance_arrays_matches_scalar(rows):
    x, v, a, dt = (np.array(c) for c in zip(*rows))
    xa, va = advance_arrays(x, v, a, dt)
    for k, row in enumerate(rows):
        xs, vs = advance_constant_accel(*row)
        assert xa[k] == pytest.approx(xs, rel=1e-12, abs=1e-9)
        assert va[k] == pytest.approx(vs, rel=1e-12, abs=1e-9)


def test_plan_state_examples():
    assert plan_state_at(TrajectoryPlan.from_phases("a", [(10, 0)]), 0, 20, 5) == pytest.approx((100, 20))
    plan = TrajectoryPlan.from_phases("b", [(2, 1), (8, 0)])
    assert plan_state_at(plan, 0, 10, 4) == pytest.approx((46, 12))
    assert plan_state_at(TrajectoryPlan("c"), 3, 7, 1) == pytest.approx((10, 7))


def test_plan_extrapolates_past_horizon():
    plan = TrajectoryPlan.from_phases("a", [(2, 1)])
    assert plan_state_at(plan, 0, 10, 5) == pytest.approx((22 + 3 * 12, 12))


def test_plan_segments_must_be_contiguous():
    with pytest.raises(ValueError):
        TrajectoryPlan("a", (Segment(0, 1, 0), Segment(2, 1, 0)))


phases = st.lists(st.tuples(st.floats(0.1, 10), st.floats(-4.5, 2.5)), min_size=1, max_size=5)


@given(phases, st.floats(0, 30), st.floats(0, 1), st.floats(0, 1))
def test_plan_composition_law(ph, v0, u1, u2):
    plan = TrajectoryPlan.from_phases("a", ph)
    t1, t2 = sorted((u1 * plan.horizon * 1.2, u2 * plan.horizon * 1.2))
    x1, v1 = plan_state_at(plan, 0.0, v0, t1)
    # continue from t1 with the remainder of the plan
    rest = []
    for seg in plan.segments:
        end = seg.t_start + seg.duration
        if end > t1:
            rest.append((end - max(seg.t_start, t1), seg.a))
    tail = TrajectoryPlan.from_phases("a", rest)
    x2, v2 = plan_state_at(tail, x1, v1, t2 - t1)
    xd, vd = plan_state_at(plan, 0.0, v0, t2)
    assert x2 == pytest.approx(xd, abs=1e-6)
    assert v2 == pytest.approx(vd, abs=1e-9)


@given(phases, st.floats(0, 30), st.lists(st.floats(0, 60), min_size=1, max_size=10))
def test_compiled_plan_matches_plan_state(ph, v0, ts):
    plan = TrajectoryPlan.from_phases("a", ph)
    cp = CompiledPlan(plan, 5.0, -100.0, v0, Lane.OUTER)
    X, V = cp.sample(np.array(ts) + 5.0)
    for k, t in enumerate(ts):
        x, v = plan_state_at(plan, -100.0, v0, t)
        assert X[k] == pytest.approx(x, abs=1e-6)
        assert V[k] == pytest.approx(v, abs=1e-9)
        xs, vs = cp.state_at(t + 5.0)
        assert xs == pytest.approx(x, abs=1e-6)


def test_plan_lane_changes():
    plan = TrajectoryPlan.from_phases(1, [(10, 0)], [(3.0, Lane.ACCEL), (6.0, Lane.OUTER)])
    cp = CompiledPlan(plan, 1.0, -50, 16, Lane.RAMP)
    assert cp.lane_at(3.9) == Lane.RAMP
    assert cp.lane_at(4.0) == Lane.ACCEL
    assert list(cp.lanes(np.array([1.0, 4.5, 7.5]))) == [Lane.RAMP, Lane.ACCEL, Lane.OUTER]


def _veh(x, cls=CAV, lane=Lane.OUTER, v=25.0):
    return VehicleState("v", cls, lane, x, v)


@pytest.mark.parametrize(
    "leader, follower, gap",
    [(_veh(60, CAT), _veh(52), 1.0), (_veh(10), _veh(5), 0.0), (_veh(10), _veh(8), -3.0)],
)
def test_bumper_gap_examples(leader, follower, gap):
    assert bumper_gap(leader, follower) == pytest.approx(gap)


def test_bumper_gap_uses_leader_length_only():
    assert bumper_gap(_veh(60, CAV), _veh(52, CAT)) == pytest.approx(3.0)


def test_layout_defaults_and_lanes():
    lay = RoadLayout()
    assert lay.L_b == 200
    assert lay.mainline_entry == -1000 and lay.ramp_entry == -300 and lay.exit_x == 500
    assert math.isclose(lay.v_lim_max, 100 / 3.6)
    assert not lay.admits(Lane.INNER, CAT.vclass)
    assert lay.admits(Lane.OUTER, CAT.vclass)
    assert Lane.RAMP.track == Lane.ACCEL.track == 2
    with pytest.raises(ValueError):
        RoadLayout(v_lim_min=30, v_lim_max=20)


def test_class_parameters():
    assert (CAV.length, CAV.accel_max, CAV.decel_max) == (5.0, 2.5, 4.5)
    assert (CAT.length, CAT.accel_max, CAT.decel_max) == (7.0, 1.5, 4.0)
