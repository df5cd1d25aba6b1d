import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from selfsteer.geometry import (DegenerateVector, PlanarPose, PlanarVec, align_rotation, compose,
                                cross, local_motion, quaternion_from_yaw, relative_pose,
                                rotation_matrix, wrap_angle, yaw_from_quaternion)

coord = st.floats(-1e3, 1e3, allow_nan=False)
angle = st.floats(-10.0, 10.0, allow_nan=False)
poses = st.builds(PlanarPose, coord, coord, angle)
vecs = st.builds(PlanarVec, st.floats(-50, 50), st.floats(-50, 50)).filter(lambda v: v.norm > 1e-3)


def close(a: PlanarPose, b: PlanarPose, tol=1e-9):
    return (abs(a.x - b.x) <= tol and abs(a.y - b.y) <= tol
            and abs(wrap_angle(a.heading - b.heading)) <= tol)


def test_heading_is_wrapped_into_half_open_interval():
    assert PlanarPose(0, 0, -math.pi).heading == math.pi
    assert PlanarPose(0, 0, 3 * math.pi).heading == pytest.approx(math.pi)
    assert -math.pi < PlanarPose(0, 0, -7.0).heading <= math.pi


@pytest.mark.parametrize("bad", [math.nan, math.inf])
def test_pose_rejects_non_finite(bad):
    with pytest.raises(ValueError):
        PlanarPose(bad, 0.0, 0.0)


def test_relative_pose_examples():
    p = PlanarPose(3.0, -2.0, 0.7)
    assert close(relative_pose(p, p), PlanarPose(0, 0, 0))
    assert close(relative_pose(PlanarPose(0, 0, 0), PlanarPose(1, 2, 0)), PlanarPose(1, 2, 0))
    # independent 2x2 matrix oracle
    frm, to = PlanarPose(0, 0, math.pi / 2), PlanarPose(0, 1, math.pi / 2)
    c, s = math.cos(-frm.heading), math.sin(-frm.heading)
    want = np.array([[c, -s], [s, c]]) @ np.array([to.x - frm.x, to.y - frm.y])
    got = relative_pose(frm, to)
    assert close(got, PlanarPose(1, 0, 0))
    assert np.allclose([got.x, got.y], want, atol=1e-12)


def test_align_rotation_examples():
    assert align_rotation(PlanarVec(1, 0)) == 0.0
    theta = align_rotation(PlanarVec(0, 2))
    assert theta == pytest.approx(-math.pi / 2)
    assert np.allclose(rotation_matrix(theta) @ [0, 2], [2, 0], atol=1e-12)
    assert align_rotation(PlanarVec(-3, 0)) == pytest.approx(math.pi)


@pytest.mark.parametrize("v", [PlanarVec(0, 0), PlanarVec(1e-10, -1e-10)])
def test_align_rotation_rejects_degenerate(v):
    with pytest.raises(DegenerateVector):
        align_rotation(v)


def test_local_motion_examples():
    m = local_motion(PlanarVec(1, 0), PlanarVec(0.99, 0.05))
    assert (m.dx, m.dy) == pytest.approx((0.99, 0.05), abs=1e-12)
    m = local_motion(PlanarVec(0, 2), PlanarVec(-0.1, 2.0))
    assert (m.dx, m.dy) == pytest.approx((2.0, 0.1), abs=1e-12)
    # complex-number oracle
    assert (m.dx, m.dy) == pytest.approx(oracles.local_motion((0, 0), (0, 2), (-0.1, 4.0)), abs=1e-12)


@given(poses, poses)
def test_round_trip(a, b):
    assert close(compose(a, relative_pose(a, b)), b, tol=1e-9)


@given(poses, poses, poses)
def test_chain_consistency(a, b, c):
    assert close(relative_pose(a, c), compose(relative_pose(a, b), relative_pose(b, c)), tol=1e-9)


@given(vecs, vecs)
def test_sign_and_norm(v_prev, v_curr):
    m = local_motion(v_prev, v_curr)
    cr = cross(v_prev, v_curr)
    if abs(cr) > 1e-9 * v_prev.norm * v_curr.norm:
        assert math.copysign(1, m.dy) == math.copysign(1, cr)
    assert m.dx ** 2 + m.dy ** 2 == pytest.approx(v_curr.norm ** 2, rel=1e-9, abs=1e-9)


def test_parallel_vectors_have_zero_dy():
    assert local_motion(PlanarVec(2, 1), PlanarVec(4, 2)).dy == pytest.approx(0, abs=1e-15)


@given(vecs, vecs, poses)
def test_rigid_motion_leaves_labels_unchanged(v1, v2, T):
    p0 = PlanarPose(0, 0, 0)
    p1 = PlanarPose(v1.vx, v1.vy, 0)
    p2 = PlanarPose(p1.x + v2.vx, p1.y + v2.vy, 0)
    q0, q1, q2 = (T.compose(p) for p in (p0, p1, p2))
    a = local_motion(PlanarVec.between(p0, p1), PlanarVec.between(p1, p2))
    b = local_motion(PlanarVec.between(q0, q1), PlanarVec.between(q1, q2))
    assert abs(a.dx - b.dx) <= 1e-9 and abs(a.dy - b.dy) <= 1e-9


@given(st.floats(-math.pi, math.pi))
def test_yaw_quaternion_round_trip(yaw):
    assert wrap_angle(yaw_from_quaternion(*quaternion_from_yaw(yaw)) - yaw) == pytest.approx(0, abs=1e-12)
