import math

import pytest
from hypothesis import given, strategies as st

import oracles
from selfsteer.geometry import PlanarPose, PlanarVec, local_motion
from selfsteer.vehicle import (InvalidStep, VehicleParams, VehicleState, ackermann_split,
                               canonical_alpha, clamp_steer, command_to_steering, speed_lag,
                               step_dynamic, step_kinematic, steering_from_lateral,
                               steering_to_command)

P = VehicleParams()


def start(speed=5.0):
    return VehicleState(PlanarPose(0.0, 0.0, 0.0), speed)


def test_steering_from_lateral_examples():
    assert steering_from_lateral(0.0, 10.0) == 0.0
    assert steering_from_lateral(0.05, canonical_alpha(P, 0.5)) == pytest.approx(0.46365, abs=1e-5)
    assert steering_from_lateral(1e9, 10.0, P) == pytest.approx(1.22173, abs=1e-5)
    assert steering_from_lateral(-1e9, 10.0, P) == -P.max_steer
    with pytest.raises(ValueError):
        steering_from_lateral(0.1, 0.0)


def test_steering_law_cross_check_by_simulation():
    # drive two 0.5 m steps at constant delta; the measured dy gives delta back
    delta = steering_from_lateral(0.05, 10.0)
    s0 = start(1.0)
    s1, _ = step_kinematic(s0, delta, 0.5, 1.0, P)
    s2, _ = step_kinematic(s1, delta, 0.5, 1.0, P)
    dy = local_motion(PlanarVec.between(s0.pose, s1.pose), PlanarVec.between(s1.pose, s2.pose)).dy
    assert math.tan(delta) * 0.25 / 2.5 == pytest.approx(0.05)
    assert dy == pytest.approx(0.05, rel=0.01)


@pytest.mark.parametrize("L,dx,want", [(2.5, 0.5, 10.0), (1.0, 1.0, 1.0), (2.5, 1.0, 2.5)])
def test_canonical_alpha(L, dx, want):
    assert canonical_alpha(VehicleParams(wheelbase=L, cg_to_front=L / 2), dx) == pytest.approx(want)


def test_params_validation():
    with pytest.raises(ValueError):
        VehicleParams(wheelbase=0.0)
    with pytest.raises(ValueError):
        VehicleParams(max_steer=math.pi / 2)


def test_kinematic_straight_step():
    s, arc = step_kinematic(start(), 0.0, 5.0, 0.1, P)
    assert (s.pose.x, s.pose.y, s.pose.heading) == pytest.approx((0.5, 0.0, 0.0), abs=1e-15)
    assert arc.straight and arc.turn_radius == math.inf and arc.heading_change == 0.0


def test_kinematic_radius_ten():
    delta = math.atan(2.5 / 10)
    s, pts = start(), []
    for _ in range(800):
        s, arc = step_kinematic(s, delta, 5.0, 2 * math.pi * 10 / 5.0 / 800, P)
        pts.append((s.pose.x, s.pose.y))
    assert arc.turn_radius == pytest.approx(10.0, rel=1e-12)
    assert oracles.fit_circle(pts) == pytest.approx(10.0, rel=1e-3)
    # closed-form points on the arc
    x, y = oracles.arc_point(10.0, 5.0 * 1.0)
    s1 = start()
    for _ in range(30):
        s1, _ = step_kinematic(s1, delta, 5.0, 1 / 30, P)
    assert (s1.pose.x, s1.pose.y) == pytest.approx((x, y), abs=1e-9)


@given(st.floats(-1.2, 1.2), st.floats(0.1, 10), st.floats(0.01, 0.1))
def test_kinematic_step_size_invariance(delta, v, dt):
    one, _ = step_kinematic(start(v), delta, v, 2 * dt, P)
    a, _ = step_kinematic(start(v), delta, v, dt, P)
    two, _ = step_kinematic(a, delta, v, dt, P)
    assert abs(one.pose.x - two.pose.x) < 1e-12 * max(1, abs(one.pose.x)) + 1e-12
    assert abs(one.pose.y - two.pose.y) < 1e-12 * max(1, abs(one.pose.y)) + 1e-12


def test_kinematic_is_energy_free():
    s, _ = step_kinematic(start(3.0), 0.2, 7.0, 0.05, P)
    assert s.speed == 7.0 and s.lateral_velocity == 0.0


@pytest.mark.parametrize("kw", [dict(dt=0.0), dict(dt=-1.0), dict(speed=-1.0), dict(steer=1.3)])
def test_invalid_steps(kw):
    args = dict(steer=0.1, speed=5.0, dt=0.1) | kw
    with pytest.raises(InvalidStep):
        step_kinematic(start(), args["steer"], args["speed"], args["dt"], P)
    with pytest.raises(InvalidStep):
        step_dynamic(start(), args["steer"], args["speed"], args["dt"], P)


def test_dynamic_straight_keeps_heading():
    s = start()
    for _ in range(30):
        s = step_dynamic(s, 0.0, 5.0, 1 / 30, P)
    assert s.pose.heading == 0.0 and s.pose.y == 0.0
    assert s.pose.x == pytest.approx(5.0)


def _drive(step, params, delta, v, seconds, dt=1 / 30):
    s = start(v)
    for _ in range(round(seconds / dt)):
        s = step(s, delta, v, dt, params)
        s = s[0] if isinstance(s, tuple) else s
    return s.pose


def test_dynamic_matches_kinematic_when_stiff():
    stiff = VehicleParams(cornering_stiffness=1e9)
    a = _drive(step_dynamic, stiff, 0.1, 5.0, 10.0)
    b = _drive(step_kinematic, stiff, 0.1, 5.0, 10.0)
    assert math.hypot(a.x - b.x, a.y - b.y) < 1e-3


def test_dynamic_converges_monotonically_with_stiffness():
    ref = _drive(step_kinematic, P, 0.15, 8.0, 4.0)
    gaps = []
    for C in (1e5, 1e6, 1e7, 1e8):
        p = _drive(step_dynamic, VehicleParams(cornering_stiffness=C), 0.15, 8.0, 4.0)
        gaps.append(math.hypot(p.x - ref.x, p.y - ref.y))
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-2


def test_dynamic_understeers_at_speed():
    dt, pts, s = 1 / 30, [], start(15.0)
    for _ in range(300):
        s = step_dynamic(s, 0.3, 15.0, dt, P)
        pts.append((s.pose.x, s.pose.y))
    assert oracles.fit_circle(pts[150:]) > P.wheelbase / math.tan(0.3)


def test_dynamic_falls_back_to_kinematic_at_rest():
    a = step_dynamic(start(0.1), 0.2, 0.1, 0.1, P)
    b, _ = step_kinematic(start(0.1), 0.2, 0.1, 0.1, P)
    assert a == b


def test_ackermann_example_and_mirror():
    params = VehicleParams(wheelbase=2.5, track_width=1.5)
    a = ackermann_split(0.2, params)
    assert a.delta_left - a.delta_right == pytest.approx(0.024, abs=1e-12)
    assert (a.delta_left, a.delta_right) == pytest.approx((0.212, 0.188), abs=1e-12)
    m = ackermann_split(-0.2, params)
    assert (m.delta_left, m.delta_right) == pytest.approx((-a.delta_right, -a.delta_left), abs=1e-15)
    assert ackermann_split(0.0, params) == type(a)(0.0, 0.0)
    with pytest.raises(ValueError):
        ackermann_split(1.3, params)


@given(st.floats(-1.2, 1.2).filter(lambda d: abs(d) > 1e-6))
def test_ackermann_inner_wheel_turns_more(d):
    a = ackermann_split(d, P)
    inner, outer = (a.delta_left, a.delta_right) if d > 0 else (a.delta_right, a.delta_left)
    assert abs(inner) > abs(outer)


def test_command_mapping():
    assert steering_to_command(1.22173, P) == pytest.approx(1.0, abs=1e-5)
    assert steering_to_command(0.0, P) == 0.0
    assert steering_to_command(0.610865, P) == pytest.approx(0.5, abs=1e-6)
    assert steering_to_command(5.0, P) == 1.0


@given(st.floats(-1.0, 1.0))
def test_command_round_trip(c):
    assert steering_to_command(command_to_steering(c, P), P) == pytest.approx(c, abs=1e-12)


def test_clamp_and_speed_lag():
    assert clamp_steer(2.0, P) == P.max_steer
    assert speed_lag(5.0, 5.0, 0.1) == 5.0
    v = speed_lag(0.0, 10.0, 0.5)
    assert v == pytest.approx(10 * (1 - math.exp(-1)))
