import math

import numpy as np
import pytest

from conftest import corridor_center, corridor_grid, room_grid
from racemcl.geometry import Pose2D
from racemcl.metrics import AlignmentParams, AlignmentScorer, LapResult, aggregate_laps, lateral_error, scan_alignment
from racemcl.raycast import cast_many
from racemcl.sensor import ScanFrame, ScanMeta

META = ScanMeta(-math.pi, 2 * math.pi / 360, 360, 6.0)


def scan_at(grid, pose, meta=META):
    r = cast_many(grid, np.full(meta.n_beams, pose.x), np.full(meta.n_beams, pose.y),
                  pose.theta + meta.bearings(), meta.range_max)
    return ScanFrame(0.0, meta.angle_min, meta.angle_increment, r, meta.range_max)


def test_alignment_perfect_at_truth():
    g = room_grid()
    p = Pose2D(1.3, 1.1, 0.4)
    assert scan_alignment(p, scan_at(g, p), g, AlignmentParams(stride=1)) == 100.0


def test_alignment_lateral_shift_in_corridor():
    g = corridor_grid(length=20.0, width=1.0)
    p = corridor_center(g)
    scan = scan_at(g, p)
    params = AlignmentParams(stride=1)
    tol = 2 * g.resolution
    shifted = Pose2D(p.x, p.y + 2 * tol + 1e-3, p.theta)
    ang = META.bearings()
    finite = scan.ranges < META.range_max
    side = finite & (np.abs(np.sin(ang)) > 0.2)
    got = scan_alignment(shifted, scan, g, params)
    # every side-wall endpoint moves off the wall; only near-axial beams can stay aligned
    assert got <= 100.0 * (1 - side.sum() / finite.sum()) + 1e-9


def test_alignment_rotated_room_below_half():
    g = room_grid()
    p = Pose2D(1.1, 1.4, 0.2)
    flipped = Pose2D(p.x, p.y, p.theta + math.pi)
    assert scan_alignment(flipped, scan_at(g, p), g, AlignmentParams(stride=1)) < 50.0


def test_alignment_no_finite_beams():
    g = room_grid()
    scan = ScanFrame(0.0, -1.0, 0.1, np.full(20, 6.0), 6.0)
    assert math.isnan(scan_alignment(Pose2D(1, 1, 0), scan, g))


def test_alignment_rigid_transform_invariance():
    g = room_grid()
    p = Pose2D(1.2, 1.5, -0.3)
    scan = scan_at(g, p)
    noisy = ScanFrame(0.0, scan.angle_min, scan.angle_increment,
                      scan.ranges + np.random.default_rng(0).normal(0, 0.05, scan.ranges.size), 6.0)
    est = Pose2D(1.25, 1.45, -0.25)
    a = scan_alignment(est, noisy, g)
    moved = g.translated(4.0, -2.5)
    b = scan_alignment(Pose2D(est.x + 4.0, est.y - 2.5, est.theta), noisy, moved)
    assert a == pytest.approx(b)


def test_alignment_params_validation():
    with pytest.raises(ValueError):
        AlignmentParams(tolerance=0.0)
    with pytest.raises(ValueError):
        AlignmentParams(stride=0)
    assert AlignmentScorer(room_grid()).tolerance == pytest.approx(0.1)


def test_lateral_error_basics():
    line = np.array([[0, 0], [10, 0]], dtype=float)
    assert lateral_error(Pose2D(3, 0, 0), line) == 0.0
    assert lateral_error(Pose2D(3, 0.1, 0), line) == pytest.approx(0.1)


def test_lateral_error_corner_against_dense_samples():
    line = np.array([[0, 0], [1, 0], [1, 1]], dtype=float)
    rng = np.random.default_rng(0)
    t = np.linspace(0, 1, 10_001)
    dense = np.vstack([np.column_stack([t, 0 * t]), np.column_stack([1 + 0 * t, t])])
    for _ in range(50):
        p = rng.uniform(0.7, 1.3, 2)
        want = np.min(np.hypot(*(dense - p).T))
        assert lateral_error(Pose2D(*p, 0), line) == pytest.approx(want, abs=1e-4)


def test_lateral_error_continuous(oval):
    s = np.linspace(0, 1, 2000)
    path = np.column_stack([oval.raceline[0, 0] + 3 * s, oval.raceline[0, 1] + 0.4 * np.sin(9 * s)])
    e = np.array([lateral_error(Pose2D(x, y, 0), oval.raceline) for x, y in path])
    steps = np.hypot(*np.diff(path, axis=0).T)
    assert np.all(np.abs(np.diff(e)) <= steps + 1e-12)


def lap(t, err=0.1, dnf=False, timing=1.0):
    return LapResult(t, np.full(5, err), np.full(5, 90.0), [{"update": timing, "total": 2 * timing}] * 3,
                     dnf, np.full(5, err), np.full(5, 0.05), np.arange(5) * 0.5, 0.3)


def test_aggregate_single_and_pair():
    one = aggregate_laps([lap(9.0)])
    assert one["lap_time"] == {"mean": 9.0, "std": 0.0}
    two = aggregate_laps([lap(9.0), lap(9.4)])
    assert two["lap_time"]["mean"] == pytest.approx(9.2)
    assert two["lap_time"]["std"] == pytest.approx(0.2)
    assert "population" in two["std_convention"]


def test_aggregate_excludes_dnf():
    r = aggregate_laps([lap(9.0), lap(0.0, dnf=True), lap(9.4)])
    assert r["dnf"] == 1 and r["completed"] == 2
    assert r["lap_time"]["mean"] == pytest.approx(9.2)
    with pytest.raises(ValueError):
        aggregate_laps([lap(0.0, dnf=True)])


def test_aggregate_permutation_invariant():
    laps = [lap(9.0 + 0.1 * i, err=0.01 * i, timing=i + 1.0) for i in range(6)]
    a = aggregate_laps(laps)
    b = aggregate_laps(laps[::-1])
    assert a["lap_time"]["mean"] == pytest.approx(b["lap_time"]["mean"], rel=1e-12)
    assert a["lateral_error_m"] == pytest.approx(b["lateral_error_m"])
    assert a["latency_ms"] == b["latency_ms"]


def test_lap_result_requires_positive_time():
    with pytest.raises(ValueError):
        LapResult(0.0, np.zeros(1), np.zeros(1))


def test_rmse_skips_convergence():
    r = LapResult(5.0, np.zeros(4), np.zeros(4), position_errors=np.array([1.0, 1.0, 0.1, 0.1]),
                  stamps=np.array([0.25, 0.5, 1.0, 1.5]))
    assert r.rmse(1.0) == pytest.approx(0.1)
