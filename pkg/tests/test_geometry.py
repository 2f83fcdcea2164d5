import math

import numpy as np
from hypothesis import given, strategies as st

from racemcl.geometry import Pose2D, compose_many, wrap_angle

angles = st.floats(-1e3, 1e3, allow_nan=False)
coords = st.floats(-100, 100, allow_nan=False)


@given(angles)
def test_wrap_angle_range_and_equivalence(a):
    w = wrap_angle(a)
    assert -math.pi <= w < math.pi
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)
    assert math.isclose(math.sin(w), math.sin(a), abs_tol=1e-9)


def test_wrap_angle_pi_maps_to_minus_pi():
    assert wrap_angle(math.pi) == -math.pi
    assert wrap_angle(-math.pi) == -math.pi
    assert np.all(wrap_angle(np.array([math.pi, 3 * math.pi])) == -math.pi)


@given(coords, coords, angles, coords, coords, angles)
def test_compose_inverse_round_trip(x, y, t, u, v, s):
    a, b = Pose2D(x, y, t), Pose2D(u, v, s)
    back = a.inverse().compose(a.compose(b))
    assert math.isclose(back.x, b.x, abs_tol=1e-7)
    assert math.isclose(back.y, b.y, abs_tol=1e-7)
    assert abs(wrap_angle(back.theta - b.theta)) < 1e-9


def test_compose_many_matches_scalar():
    rng = np.random.default_rng(0)
    poses = rng.uniform(-5, 5, (50, 3))
    off = Pose2D(0.27, -0.1, 0.3)
    out = compose_many(poses, off)
    for p, o in zip(poses, out):
        ref = Pose2D.from_array(p).compose(off)
        np.testing.assert_allclose(o, ref.as_array(), atol=1e-12)
