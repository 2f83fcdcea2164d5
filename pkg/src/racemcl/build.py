"""Factories turning a RunConfig into runtime objects."""

from __future__ import annotations

import math
from pathlib import Path

from .geometry import Pose2D
from .grid import OccupancyGrid, load_map_yaml
from .metrics import AlignmentParams
from .motion import MotionParams
from .particle_filter import FilterContext
from .raycast import RangeLUT, build_lut
from .sensor import (BeamModelParams, ScanMeta, SensorModel, build_beam_table, layout_boxed,
                     layout_uniform)
from .sim.car import CarParams, PursuitParams
from .sim.lap import FilterSetup, SimSettings
from .sim.odometry import SlipProfile
from .sim.track import Track, resolve_track


class LUTMismatch(ValueError):
    pass


def motion_params(cfg) -> MotionParams:
    m = cfg.motion
    return MotionParams(m.alpha1, m.alpha2, m.alpha3, m.alpha4, m.lam_thresh, m.fixed_sigma_xy,
                        m.fixed_sigma_theta, m.max_steer, m.wheelbase, m.cap_gain)


def scan_meta(cfg) -> ScanMeta:
    s = cfg.sensor
    if s.beams < 1 or not 0 < s.fov_deg <= 360:
        raise ValueError("sensor.beams must be >= 1 and fov_deg in (0, 360]")
    fov = math.radians(s.fov_deg)
    return ScanMeta(-0.5 * fov, fov / s.beams, s.beams, s.max_range)


def beam_params(cfg, resolution: float = 0.05) -> BeamModelParams:
    s = cfg.sensor
    return BeamModelParams(s.z_hit, s.z_short, s.z_max, s.z_rand, s.sigma_hit, s.lambda_short,
                           resolution, s.max_range, s.squash)


def slip_profile(cfg, name: str) -> SlipProfile:
    p = cfg.slip[name]
    return SlipProfile(p.trans_scale, p.trans_noise, p.rot_noise)


def lidar_offset(cfg) -> Pose2D:
    return Pose2D(*cfg.sensor.lidar_offset)


def alignment_params(cfg) -> AlignmentParams:
    return AlignmentParams(cfg.eval.alignment_tolerance, cfg.eval.alignment_stride)


def sim_settings(cfg) -> SimSettings:
    s = cfg.sim
    return SimSettings(
        physics_hz=s.physics_hz, filter_hz=s.filter_hz, scan_meta=scan_meta(cfg),
        scan_noise=cfg.sensor.noise, lidar_offset=lidar_offset(cfg),
        car=CarParams(cfg.motion.wheelbase, cfg.motion.max_steer, s.max_steer_rate, s.max_accel,
                      s.max_decel),
        pursuit=PursuitParams(s.lookahead_min, s.lookahead_gain, s.lookahead_max, s.speed_gain,
                              s.speed_scale),
        timeout_factor=s.timeout_factor, alignment=alignment_params(cfg))


def track(cfg) -> Track:
    t = resolve_track(cfg.map.track)
    if cfg.map.map:
        t.grid = load_map_yaml(cfg.map.map)
    return t


def check_lut(lut: RangeLUT, grid: OccupancyGrid):
    o, g = lut.origin, grid.origin
    if (lut.nx, lut.ny) != (grid.width, grid.height) or abs(lut.resolution - grid.resolution) > 1e-12 \
            or max(abs(o.x - g.x), abs(o.y - g.y), abs(o.theta - g.theta)) > 1e-9:
        raise LUTMismatch("LUT geometry does not match the map (size, resolution or origin)")


def lut_for(cfg, grid: OccupancyGrid, build: bool = False) -> RangeLUT:
    if cfg.map.lut_path and Path(cfg.map.lut_path).is_file() and not build:
        lut = RangeLUT.load(cfg.map.lut_path)
        check_lut(lut, grid)
        if lut.ntheta != cfg.sensor.ntheta or abs(lut.max_range - cfg.sensor.max_range) > 1e-9:
            raise LUTMismatch(f"LUT has ntheta={lut.ntheta}, max_range={lut.max_range}; config asks for "
                              f"ntheta={cfg.sensor.ntheta}, max_range={cfg.sensor.max_range}")
        return lut
    if not build:
        raise FileNotFoundError("no LUT available: set map.lut_path or pass --build-lut")
    return build_lut(grid, cfg.sensor.ntheta, cfg.sensor.max_range,
                     int(cfg.sensor.lut_max_mb * 2**20))


def layout(cfg, k: int | None = None):
    k = cfg.sensor.k if k is None else k
    meta = scan_meta(cfg)
    if cfg.sensor.layout == "boxed":
        return layout_boxed(meta, k, cfg.sensor.aspect)
    return layout_uniform(meta, k)


def sensor_model(cfg, grid: OccupancyGrid, lut: RangeLUT | None, backend: str | None = None,
                 k: int | None = None) -> SensorModel:
    backend = backend or cfg.sensor.backend
    return SensorModel(layout(cfg, k), build_beam_table(beam_params(cfg, grid.resolution)),
                       lut=lut, grid=grid, lidar_offset=lidar_offset(cfg), backend=backend,
                       floor=cfg.sensor.floor)


def filter_context(cfg, sensor: SensorModel, model: str | None = None) -> FilterContext:
    return FilterContext(sensor, motion_params(cfg), model or cfg.motion.model,
                         cfg.filter.resample_ess_frac, cfg.filter.estimate)


def filter_setup(cfg, ctx: FilterContext) -> FilterSetup:
    return FilterSetup(ctx, cfg.filter.n, tuple(cfg.filter.init_sigma))
