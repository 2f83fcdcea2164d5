import math

import numpy as np
import pytest

from conftest import corridor_center, corridor_grid, make_grid
from racemcl.geometry import Pose2D
from racemcl.motion import MotionParams
from racemcl.particle_filter import FilterContext
from racemcl.raycast import cast_many
from racemcl.sensor import DEFAULT_SCAN_META, ScanMeta, SensorModel, build_beam_table, layout_boxed
from racemcl.sim import HQ, LQ, CarParams, CarState, SlipProfile, corrupt_odometry, step_car
from racemcl.sim.lap import FilterSetup, SimLog, SimSettings, drive_lap, synth_scan
from racemcl.sim.track import generate_track, load_track, save_track


def test_straight_line():
    s = step_car(CarState(Pose2D(1, 2, 0.3), 2.0, 0.0), 0.0, 0.0, 0.1)
    assert s.pose.x == pytest.approx(1 + 0.2 * math.cos(0.3))
    assert s.pose.y == pytest.approx(2 + 0.2 * math.sin(0.3))


def test_standing_still():
    s0 = CarState(Pose2D(1, 2, 0.3), 0.0, 0.2)
    s = step_car(s0, 0.0, 0.2, 0.01)
    assert s.pose == s0.pose


def test_constant_steer_circle():
    p = CarParams()
    delta, v, dt = 0.3, 3.0, 1e-3
    radius = p.wheelbase / math.tan(delta)
    s = CarState(Pose2D(0, 0, 0), v, delta)
    n = int(round(2 * math.pi * radius / (v * dt)))
    worst = 0.0
    for _ in range(n):
        s = step_car(s, 0.0, delta, dt, p)
        worst = max(worst, abs(math.hypot(s.pose.x, s.pose.y - radius) - radius))
    assert worst < 1e-3
    assert s.v == v


def test_steer_slew_and_limits():
    p = CarParams()
    s = step_car(CarState(Pose2D(), 1.0, 0.0), 0.0, 1.0, 0.01, p)
    assert s.steer == pytest.approx(p.max_steer_rate * 0.01)
    for _ in range(200):
        s = step_car(s, -100.0, 1.0, 0.01, p)
    assert s.steer == pytest.approx(p.max_steer) and s.v == 0.0


def test_synth_scan_matches_exact_without_noise():
    g = corridor_grid()
    pose = corridor_center(g)
    meta = ScanMeta(-math.pi, 2 * math.pi / 90, 90, 5.0)
    scan = synth_scan(g, CarState(pose), Pose2D(), meta, 0.0, None)
    want = cast_many(g, np.full(90, pose.x), np.full(90, pose.y), pose.theta + meta.bearings(), 5.0)
    np.testing.assert_array_equal(scan.ranges, want)


def test_synth_scan_noise_level():
    g = corridor_grid(length=6.0)
    pose = corridor_center(g)
    meta = DEFAULT_SCAN_META
    clean = synth_scan(g, CarState(pose), Pose2D(), meta, 0.0, None).ranges
    rng = np.random.default_rng(0)
    res = []
    for _ in range(20):
        r = synth_scan(g, CarState(pose), Pose2D(), meta, 0.02, rng).ranges
        hit = clean < meta.range_max
        res.append(r[hit] - clean[hit])
    assert np.std(np.concatenate(res)) == pytest.approx(0.02, rel=0.05)


def test_synth_scan_open_space():
    g = make_grid(np.zeros((400, 400), dtype=np.uint8))
    meta = ScanMeta(-0.5, 0.01, 101, 3.0)
    scan = synth_scan(g, CarState(Pose2D(10, 10, 0)), Pose2D(), meta, 0.02, np.random.default_rng(0))
    assert np.all(scan.ranges == 3.0)


def test_synth_scan_outside_map():
    with pytest.raises(ValueError):
        synth_scan(corridor_grid(), CarState(Pose2D(-3, 0, 0)), Pose2D(), DEFAULT_SCAN_META, 0.0, None)


def test_identity_and_scaled_odometry():
    rng = np.random.default_rng(0)
    a, b = Pose2D(0, 0, 0.2), Pose2D(0.8, 0.3, 0.5)
    out = corrupt_odometry(a, b, a, SlipProfile(), rng)
    assert out.x == pytest.approx(b.x) and out.y == pytest.approx(b.y) and out.theta == pytest.approx(b.theta)
    out = corrupt_odometry(Pose2D(), Pose2D(1, 0, 0), Pose2D(), SlipProfile(1.3), rng)
    assert out.x == pytest.approx(1.3) and out.y == pytest.approx(0.0)


def test_uncorrupted_recomposition_tracks_truth():
    rng = np.random.default_rng(1)
    s = CarState(Pose2D(0, 0, 0), 4.0, 0.0)
    odom = s.pose
    for i in range(400):
        nxt = step_car(s, 0.5, 0.3 * math.sin(i / 30), 0.0025)
        odom = corrupt_odometry(s.pose, nxt.pose, odom, SlipProfile(), rng)
        assert odom.distance(nxt.pose) < 1e-9
        s = nxt


def test_slip_profile_validation():
    with pytest.raises(ValueError):
        SlipProfile(0.0)
    with pytest.raises(ValueError):
        SlipProfile(1.0, -0.1)


def test_track_bundle_round_trip(tmp_path):
    t = generate_track("oval")
    t2 = load_track(save_track(t, tmp_path / "oval"))
    assert np.array_equal(t2.grid.cells, t.grid.cells)
    np.testing.assert_allclose(t2.raceline, t.raceline, atol=1e-6)


@pytest.mark.parametrize("name", ["oval", "hairpin"])
def test_fixture_track_invariants(request, name):
    t = request.getfixturevalue(name)
    rl = t.raceline
    assert np.hypot(*(rl[0, :2] - rl[-1, :2])) <= t.grid.resolution
    ix, iy, ok = t.grid.world_to_grid_many(rl[:, 0], rl[:, 1])
    assert ok.all() and np.all(t.grid.cells[iy, ix] == 0)
    assert rl[:, 2].max() == pytest.approx(7.6, abs=1e-6)


def test_ground_truth_lap(oval):
    r, _ = drive_lap(oval, SimSettings(), HQ, None, seed=0)
    assert not r.dnf
    assert 0 < r.lap_time < 2 * oval.length / 5.0
    # bounded by the pursuit lookahead chord geometry
    assert np.max(r.lateral_errors_true) < 0.2


def filter_setup(oval_lut, n=3000, freeze=False):
    sensor = SensorModel(layout_boxed(DEFAULT_SCAN_META, 60, 0.3), build_beam_table(), lut=oval_lut,
                         lidar_offset=SimSettings().lidar_offset)
    return FilterSetup(FilterContext(sensor, MotionParams(), "tum"), n, freeze_estimate=freeze)


@pytest.mark.slow
def test_filter_lap_time_close_to_ground_truth(oval, oval_lut):
    gt, _ = drive_lap(oval, SimSettings(), HQ, None, seed=3)
    pf, _ = drive_lap(oval, SimSettings(), HQ, filter_setup(oval_lut), seed=3)
    assert not pf.dnf
    assert abs(pf.lap_time - gt.lap_time) <= 0.02 * gt.lap_time


def test_frozen_estimate_crashes(oval, oval_lut):
    r, _ = drive_lap(oval, SimSettings(), HQ, filter_setup(oval_lut, n=200, freeze=True), seed=0)
    assert r.dnf and r.dnf_reason == "wall contact"


def test_lap_log_reproducible(tmp_path, oval):
    a = drive_lap(oval, SimSettings(), LQ, None, seed=4, record=True)[1]
    b = drive_lap(oval, SimSettings(), LQ, None, seed=4, record=True)[1]
    pa, pb = a.write(tmp_path / "a.jsonl"), b.write(tmp_path / "b.jsonl")
    assert pa.read_bytes() == pb.read_bytes()
    back = SimLog.read(pa)
    assert len(back.frames) == len(a.frames)
    stamps = np.array([f.stamp for f in back.frames])
    np.testing.assert_allclose(np.diff(stamps), a.dt, atol=1e-9)


def test_lq_odometry_drifts_more(oval):
    hq = [drive_lap(oval, SimSettings(), HQ, None, seed=s)[0].dead_reckoning_error for s in range(5)]
    lq = [drive_lap(oval, SimSettings(), LQ, None, seed=s)[0].dead_reckoning_error for s in range(5)]
    assert np.mean(lq) > 2 * np.mean(hq)


def test_simlog_rejects_malformed(tmp_path, oval):
    log = drive_lap(oval, SimSettings(), HQ, None, seed=0, record=True)[1]
    path = log.write(tmp_path / "l.jsonl")
    lines = path.read_text().splitlines()
    bad = tmp_path / "bad.jsonl"
    bad.write_text("\n".join(lines[:5] + [lines[5][: len(lines[5]) // 2]]) + "\n")
    with pytest.raises(ValueError, match=r"bad.jsonl:6"):
        SimLog.read(bad)
    swapped = tmp_path / "swap.jsonl"
    swapped.write_text("\n".join([lines[0], lines[2], lines[1]]) + "\n")
    with pytest.raises(ValueError, match=r"swap.jsonl:3.*increase"):
        SimLog.read(swapped)
