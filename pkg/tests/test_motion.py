import math

import numpy as np
import pytest

from racemcl.geometry import Pose2D, wrap_angle
from racemcl.motion import (MotionParams, OdometryDelta, advance, decompose_odometry, noise_stds,
                            perturbed_deltas, propagate, rotation_cap, sample_diff_drive, sample_tum)

N = 100_000
ZERO = MotionParams(0.0, 0.0, 0.0, 0.0, fixed_sigma_xy=0.0, fixed_sigma_theta=0.0)


def test_decompose_examples():
    d = decompose_odometry(Pose2D(0, 0, 0), Pose2D(1, 0, 0))
    assert (d.rot1, d.trans, d.rot2) == pytest.approx((0.0, 1.0, 0.0))
    d = decompose_odometry(Pose2D(0, 0, 0), Pose2D(0, 0, math.pi / 2))
    assert (d.rot1, d.trans, d.rot2) == pytest.approx((0.0, 0.0, math.pi / 2))
    d = decompose_odometry(Pose2D(0, 0, 0), Pose2D(1, 1, math.pi / 2))
    assert (d.rot1, d.trans, d.rot2) == pytest.approx((math.pi / 4, math.sqrt(2), math.pi / 4))


def test_decompose_advance_round_trip():
    rng = np.random.default_rng(2)
    for _ in range(200):
        a = Pose2D(*rng.uniform(-5, 5, 2), rng.uniform(-3, 3))
        b = Pose2D(*rng.uniform(-5, 5, 2), rng.uniform(-3, 3))
        c = advance(a, decompose_odometry(a, b))
        assert c.x == pytest.approx(b.x, abs=1e-9) and c.y == pytest.approx(b.y, abs=1e-9)
        assert abs(wrap_angle(c.theta - b.theta)) < 1e-9


def test_zero_alphas_deterministic():
    d = OdometryDelta(math.pi / 4, math.sqrt(2), math.pi / 4)
    rng = np.random.default_rng(0)
    for model in ("diffdrive", "tum", "naive"):
        out = propagate(np.zeros((5, 3)), d, ZERO, model, rng)
        np.testing.assert_allclose(out, np.tile([1.0, 1.0, math.pi / 2], (5, 1)), atol=1e-12)


def test_invalid_delta_and_params():
    with pytest.raises(ValueError):
        OdometryDelta(0.0, -0.1, 0.0)
    with pytest.raises(ValueError):
        OdometryDelta(0.0, 0.1, 0.0, dt=0.0)
    with pytest.raises(ValueError):
        MotionParams(alpha1=-1.0)
    with pytest.raises(ValueError):
        propagate(np.zeros((1, 3)), OdometryDelta(0, 0, 0), MotionParams(), "bogus",
                  np.random.default_rng(0))


def test_pure_translation_heading_variance():
    p = MotionParams(alpha1=0.5, alpha2=0.015, alpha3=0.1, alpha4=1.0)
    d = OdometryDelta(0.0, 1.0, 0.0)
    out = propagate(np.zeros((N, 3)), d, p, "diffdrive", np.random.default_rng(1))
    # two independent rotation draws, each with variance alpha2 * trans^2
    expect = 2 * 0.015
    assert np.var(out[:, 2]) == pytest.approx(expect, rel=0.03)


@pytest.mark.parametrize("rot1, trans, rot2", [(0.3, 0.5, -0.2), (-1.0, 0.05, 0.4), (0.0, 2.0, 0.0)])
def test_component_variances_closed_form(rot1, trans, rot2):
    p = MotionParams()
    d = OdometryDelta(rot1, trans, rot2)
    r1, t, r2 = perturbed_deltas(d, p, "diffdrive", np.random.default_rng(3), N)
    assert np.var(r1) == pytest.approx(p.alpha1 * rot1**2 + p.alpha2 * trans**2, rel=0.03)
    assert np.var(t) == pytest.approx(p.alpha3 * trans**2 + p.alpha4 * (rot1**2 + rot2**2), rel=0.03)
    assert np.var(r2) == pytest.approx(p.alpha1 * rot2**2 + p.alpha2 * trans**2, rel=0.03)


def test_tum_below_threshold_identical():
    p = MotionParams()
    d = OdometryDelta(0.2, 0.5 * p.lam_thresh, -0.1)
    a = propagate(np.zeros((100, 3)), d, p, "diffdrive", np.random.default_rng(9))
    b = propagate(np.zeros((100, 3)), d, p, "tum", np.random.default_rng(9))
    assert np.array_equal(a, b)


def test_tum_racing_speed_narrower_heading():
    p = MotionParams()
    d = OdometryDelta(0.0, 0.19, 0.0, v=7.6, dt=0.025)
    a = propagate(np.zeros((N, 3)), d, p, "diffdrive", np.random.default_rng(4))
    b = propagate(np.zeros((N, 3)), d, p, "tum", np.random.default_rng(4))
    assert np.std(b[:, 2]) < np.std(a[:, 2])


def test_cap_disabled_matches_diffdrive():
    p = MotionParams(max_steer=math.pi / 2)
    assert rotation_cap(1.0, p) == math.inf
    rng = np.random.default_rng(8)
    for _ in range(20):
        d = OdometryDelta(rng.uniform(-1, 1), rng.uniform(0, 2), rng.uniform(-1, 1))
        a = propagate(np.zeros((50, 3)), d, p, "diffdrive", np.random.default_rng(1))
        b = propagate(np.zeros((50, 3)), d, p, "tum", np.random.default_rng(1))
        assert np.array_equal(a, b)


def test_cap_grows_with_distance():
    p = MotionParams()
    caps = [rotation_cap(t, p) for t in (0.1, 0.2, 0.4)]
    assert caps[0] < caps[1] < caps[2]
    assert caps[1] == pytest.approx(2 * caps[0])


def test_tum_never_wider_than_diffdrive():
    p = MotionParams()
    rng = np.random.default_rng(6)
    for _ in range(200):
        d = OdometryDelta(rng.uniform(-0.5, 0.5), rng.uniform(0, 0.5), rng.uniform(-0.5, 0.5))
        dd, tum = noise_stds(d, p, "diffdrive"), noise_stds(d, p, "tum")
        assert tum[0] <= dd[0] and tum[2] <= dd[2] and tum[1] == dd[1]


def test_naive_fixed_noise():
    p = MotionParams(fixed_sigma_xy=0.1, fixed_sigma_theta=0.05)
    out = propagate(np.zeros((N, 3)), OdometryDelta(0, 0, 0), p, "naive", np.random.default_rng(0))
    assert np.std(out[:, 0]) == pytest.approx(0.1, rel=0.03)
    short = propagate(np.zeros((N, 3)), OdometryDelta(0, 0.01, 0), p, "naive", np.random.default_rng(1))
    long = propagate(np.zeros((N, 3)), OdometryDelta(0, 1.0, 0), p, "naive", np.random.default_rng(1))
    assert np.std(short[:, 1]) == pytest.approx(np.std(long[:, 1]), rel=1e-12)


def test_single_pose_samplers():
    p = MotionParams()
    d = OdometryDelta(0.1, 0.3, 0.0)
    a = sample_diff_drive(Pose2D(), d, p, np.random.default_rng(0))
    b = sample_tum(Pose2D(), d, p, np.random.default_rng(0))
    assert isinstance(a, Pose2D) and isinstance(b, Pose2D)
    assert a.distance(Pose2D()) == pytest.approx(0.3, abs=0.2)


@pytest.mark.parametrize("model", ["naive", "diffdrive", "tum"])
def test_mean_unbiased(model):
    p = MotionParams()
    d = OdometryDelta(0.05, 0.15, -0.03)
    n = 10_000
    out = propagate(np.zeros((n, 3)), d, p, model, np.random.default_rng(12))
    want = advance(Pose2D(), d).as_array()
    bias = np.abs(out.mean(axis=0) - want)
    assert np.all(bias < 3 * out.std(axis=0) / math.sqrt(n))


def test_gate_continuity_when_cap_is_loose():
    # a generous cap gain keeps the cap above the diff-drive spread on both sides of the gate
    p = MotionParams(cap_gain=50.0)
    for trans in (p.lam_thresh - 1e-9, p.lam_thresh + 1e-9):
        d = OdometryDelta(0.1, trans, -0.05)
        a = propagate(np.zeros((64, 3)), d, p, "diffdrive", np.random.default_rng(2))
        b = propagate(np.zeros((64, 3)), d, p, "tum", np.random.default_rng(2))
        assert np.array_equal(a, b)
