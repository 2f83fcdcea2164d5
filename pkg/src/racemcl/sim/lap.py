"""Closed-loop lap driver, synthetic LiDAR and SimLog recording/replay."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .. import rng as rngs
from ..geometry import Pose2D
from ..grid import OccupancyGrid
from ..metrics import AlignmentParams, AlignmentScorer, LapResult, lateral_error
from ..motion import decompose_odometry
from ..particle_filter import FilterContext, ParticleFilter, init_pose
from ..raycast import cast_many
from ..sensor import DEFAULT_SCAN_META, ScanFrame, ScanMeta
from .car import CarParams, CarState, PursuitParams, RacelineFollower, step_car
from .odometry import HQ, SlipProfile, corrupt_odometry
from .track import Track

LIDAR_OFFSET = Pose2D(0.27, 0.0, 0.0)


@dataclass(frozen=True)
class SimSettings:
    physics_hz: int = 400
    filter_hz: int = 40
    scan_meta: ScanMeta = DEFAULT_SCAN_META
    scan_noise: float = 0.02
    lidar_offset: Pose2D = LIDAR_OFFSET
    car: CarParams = field(default_factory=CarParams)
    pursuit: PursuitParams = field(default_factory=PursuitParams)
    timeout_factor: float = 3.0
    alignment: AlignmentParams = field(default_factory=AlignmentParams)

    def __post_init__(self):
        if self.physics_hz % self.filter_hz:
            raise ValueError("physics_hz must be a multiple of filter_hz")


@dataclass(frozen=True)
class FilterSetup:
    ctx: FilterContext
    n: int = 3000
    init_sigmas: tuple = (0.1, 0.1, 0.05)
    freeze_estimate: bool = False


def synth_scan(grid: OccupancyGrid, state: CarState, lidar_offset: Pose2D, meta: ScanMeta,
               noise_sigma: float, rng: np.random.Generator | None, stamp: float = 0.0) -> ScanFrame:
    """Exact casts for every beam plus Gaussian range noise, clamped to [0, range_max]."""
    lidar = state.pose.compose(lidar_offset)
    if not grid.in_bounds(lidar.x, lidar.y):
        raise ValueError(f"LiDAR at ({lidar.x:.3f}, {lidar.y:.3f}) is outside the map")
    ang = lidar.theta + meta.bearings()
    r = cast_many(grid, np.full(meta.n_beams, lidar.x), np.full(meta.n_beams, lidar.y), ang,
                  meta.range_max)
    if noise_sigma > 0 and rng is not None:
        hit = r < meta.range_max
        r = np.where(hit, r + noise_sigma * rng.standard_normal(meta.n_beams), r)
    return ScanFrame(stamp, meta.angle_min, meta.angle_increment, np.clip(r, 0.0, meta.range_max),
                     meta.range_max)


@dataclass
class SimFrame:
    stamp: float
    ground_truth: Pose2D
    odom_pose: Pose2D
    v: float
    scan: ScanFrame

    def to_json(self) -> str:
        g, o = self.ground_truth, self.odom_pose
        return json.dumps({"kind": "frame", "stamp": self.stamp,
                           "ground_truth": [g.x, g.y, g.theta], "odom_pose": [o.x, o.y, o.theta],
                           "v": self.v, "scan": self.scan.to_dict()})


@dataclass
class SimLog:
    frames: list = field(default_factory=list)
    dt: float = 0.025
    lidar_offset: Pose2D = LIDAR_OFFSET
    track: str = ""

    def write(self, path) -> Path:
        path = Path(path)
        with open(path, "w") as f:
            o = self.lidar_offset
            f.write(json.dumps({"kind": "header", "dt": self.dt, "track": self.track,
                                "lidar_offset": [o.x, o.y, o.theta]}) + "\n")
            for fr in self.frames:
                f.write(fr.to_json() + "\n")
        return path

    @classmethod
    def read(cls, path) -> "SimLog":
        log = cls()
        last = -math.inf
        with open(path) as f:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    if rec.get("kind") == "header":
                        log.dt = float(rec["dt"])
                        log.track = rec.get("track", "")
                        log.lidar_offset = Pose2D(*rec["lidar_offset"])
                        continue
                    fr = SimFrame(float(rec["stamp"]), Pose2D(*rec["ground_truth"]),
                                  Pose2D(*rec["odom_pose"]), float(rec["v"]),
                                  ScanFrame.from_dict(rec["scan"]))
                except (ValueError, KeyError, TypeError) as e:
                    raise ValueError(f"{path}:{lineno}: malformed record ({e})") from e
                if fr.stamp <= last:
                    raise ValueError(f"{path}:{lineno}: stamps must strictly increase")
                last = fr.stamp
                log.frames.append(fr)
        if not log.frames:
            raise ValueError(f"{path}: log has no frames")
        return log


def _contact_mask(grid: OccupancyGrid) -> np.ndarray:
    """Cells that are blocked or touch a blocked cell (8-neighborhood)."""
    return ndimage.binary_dilation(grid.blocked, structure=np.ones((3, 3), dtype=bool))


def drive_lap(track: Track, settings: SimSettings = SimSettings(), slip: SlipProfile = HQ,
              filt: FilterSetup | None = None, seed: int = 0, record: bool = False):
    """Drive one flying lap; returns (LapResult, SimLog or None).

    With ``filt`` None the controller is fed the true pose (ground-truth mode);
    otherwise an MCL filter runs at ``filter_hz`` and the controller consumes its
    estimate.
    """
    grid = track.grid
    contact = _contact_mask(grid)
    follower = RacelineFollower(track.raceline, settings.pursuit, settings.car)
    dt_f = 1.0 / settings.filter_hz
    sub = settings.physics_hz // settings.filter_hz
    dt_p = dt_f / sub
    start = track.start_pose()
    state = CarState(start, settings.pursuit.speed_scale * float(track.raceline[0, 2]), 0.0)
    scan_rng = rngs.stream(seed, rngs.SIM_SCAN)
    odom_rng = rngs.stream(seed, rngs.SIM_ODOM)
    scorer = AlignmentScorer(grid, settings.alignment, settings.lidar_offset)

    pf = None
    if filt is not None:
        ps = init_pose(start, filt.init_sigmas, filt.n, rngs.stream(seed, rngs.FILTER_INIT), grid)
        pf = ParticleFilter(filt.ctx, ps, seed)
    believed = start
    frozen = start
    odom = start
    prev_true = start
    nominal = track.length / max(1e-6, settings.pursuit.speed_scale * float(np.mean(track.raceline[:, 2])))
    timeout = settings.timeout_factor * nominal

    log = SimLog(dt=dt_f, lidar_offset=settings.lidar_offset, track=track.name) if record else None
    lat, lat_true, align, timings, pos_err, stamps = [], [], [], [], [], []
    t = 0.0
    k = 0
    dnf_reason = ""
    lap_time = math.nan
    while True:
        # control at the filter rate
        idx = follower.observe(state.pose.x, state.pose.y)
        use = frozen if (filt is not None and filt.freeze_estimate) else believed
        accel, steer = follower.command(use, state.v, None if filt is not None else idx)
        crashed = False
        for _ in range(sub):
            state = step_car(state, accel, steer, dt_p, settings.car)
            ix, iy, ok = grid.world_to_grid_many(state.pose.x, state.pose.y)
            if not ok or contact[iy, ix]:
                crashed = True
                break
        k += 1
        t = k * dt_f
        if crashed:
            dnf_reason = "wall contact"
            break
        follower.observe(state.pose.x, state.pose.y)
        if follower.progress >= follower.length:
            lap_time = t
            break
        if t > timeout:
            dnf_reason = "timeout"
            break

        odom_new = corrupt_odometry(prev_true, state.pose, odom, slip, odom_rng)
        scan = synth_scan(grid, state, settings.lidar_offset, settings.scan_meta,
                          settings.scan_noise, scan_rng, t)
        if pf is not None:
            d = decompose_odometry(odom, odom_new, state.v, dt_f)
            est, timing = pf.step(d, scan)
            believed = est.mean
            timings.append(timing.as_ms())
        else:
            believed = state.pose
        odom = odom_new
        prev_true = state.pose
        if log is not None:
            log.frames.append(SimFrame(t, state.pose, odom, state.v, scan))
        stamps.append(t)
        lat.append(lateral_error(believed, track.raceline))
        lat_true.append(lateral_error(state.pose, track.raceline))
        align.append(scorer.score(believed, scan))
        pos_err.append(believed.distance(state.pose))

    dr_err = odom.distance(state.pose)
    result = LapResult(lap_time if not dnf_reason else 0.0, np.array(lat), np.array(align), timings,
                       bool(dnf_reason), np.array(lat_true), np.array(pos_err), np.array(stamps),
                       dr_err, dnf_reason)
    return result, log
