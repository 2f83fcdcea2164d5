"""Per-step metrics (scan alignment, lateral error) and lap aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose2D
from .grid import OccupancyGrid
from .sensor import ScanFrame

PHASES = ("predict", "update", "resample", "estimate", "total")


@dataclass(frozen=True)
class AlignmentParams:
    tolerance: float | None = None   # meters; None means 2 * map resolution
    stride: int = 10

    def __post_init__(self):
        if self.tolerance is not None and not self.tolerance > 0:
            raise ValueError("alignment tolerance must be > 0")
        if self.stride < 1:
            raise ValueError("alignment stride must be >= 1")


class AlignmentScorer:
    """Scan alignment against a map, with the distance transform computed once."""

    def __init__(self, grid: OccupancyGrid, params: AlignmentParams = AlignmentParams(),
                 lidar_offset: Pose2D = Pose2D()):
        self.grid = grid
        self.params = params
        self.tolerance = params.tolerance if params.tolerance is not None else 2 * grid.resolution
        self.lidar_offset = lidar_offset
        self.dist = grid.distance_to_occupied()

    def endpoints(self, pose: Pose2D, scan: ScanFrame):
        lidar = pose.compose(self.lidar_offset)
        idx = np.arange(0, len(scan.ranges), self.params.stride)
        r = scan.ranges[idx]
        keep = r < scan.range_max
        ang = lidar.theta + scan.angle_min + idx[keep] * scan.angle_increment
        return lidar.x + r[keep] * np.cos(ang), lidar.y + r[keep] * np.sin(ang)

    def score(self, pose: Pose2D, scan: ScanFrame) -> float:
        """Percentage of finite beam endpoints within tolerance of an OCCUPIED cell; NaN if none."""
        x, y = self.endpoints(pose, scan)
        if x.size == 0:
            return math.nan
        ix, iy, ok = self.grid.world_to_grid_many(x, y)
        d = np.full(x.size, np.inf)
        d[ok] = self.dist[iy[ok], ix[ok]]
        return 100.0 * float(np.count_nonzero(d <= self.tolerance)) / x.size


def scan_alignment(est_pose: Pose2D, scan: ScanFrame, grid: OccupancyGrid,
                   params: AlignmentParams = AlignmentParams(), lidar_offset: Pose2D = Pose2D()) -> float:
    return AlignmentScorer(grid, params, lidar_offset).score(est_pose, scan)


def lateral_error(pose: Pose2D, raceline: np.ndarray) -> float:
    """Unsigned distance from the pose position to the piecewise-linear raceline."""
    pts = np.asarray(raceline, dtype=float)[:, :2]
    if len(pts) == 1:
        return math.hypot(pose.x - pts[0, 0], pose.y - pts[0, 1])
    a, b = pts[:-1], pts[1:]
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    p = np.array([pose.x, pose.y])
    t = np.einsum("ij,ij->i", p - a, ab) / np.where(denom > 0, denom, 1.0)
    t = np.clip(np.where(denom > 0, t, 0.0), 0.0, 1.0)
    proj = a + t[:, None] * ab
    return float(np.min(np.hypot(proj[:, 0] - p[0], proj[:, 1] - p[1])))


@dataclass
class LapResult:
    lap_time: float
    lateral_errors: np.ndarray                 # from the pose the controller used
    alignment: np.ndarray                      # percent, per filter step
    timings: list = field(default_factory=list)  # per-step dicts of phase -> ms
    dnf: bool = False
    lateral_errors_true: np.ndarray = field(default_factory=lambda: np.empty(0))
    position_errors: np.ndarray = field(default_factory=lambda: np.empty(0))
    stamps: np.ndarray = field(default_factory=lambda: np.empty(0))
    dead_reckoning_error: float = math.nan
    dnf_reason: str = ""

    def __post_init__(self):
        if not self.dnf and not self.lap_time > 0:
            raise ValueError("completed laps need a positive lap time")

    def rmse(self, skip_seconds: float = 1.0) -> float:
        m = self.stamps >= skip_seconds if self.stamps.size else slice(None)
        e = self.position_errors[m]
        return float(np.sqrt(np.mean(e * e))) if e.size else math.nan


def _mean_std(values):
    a = np.asarray(values, dtype=float)
    return float(a.mean()), float(a.std(ddof=0))


def aggregate_laps(results: list[LapResult]) -> dict:
    """Condition summary: mean / population std over completed laps, DNFs counted apart."""
    done = [r for r in results if not r.dnf]
    if not done:
        raise ValueError("all laps DNF; nothing to aggregate")
    lt_mu, lt_sd = _mean_std([r.lap_time for r in done])
    per_lap_err = [float(np.mean(r.lateral_errors)) for r in done]
    err_mu, err_sd = _mean_std(per_lap_err)
    per_lap_align = [float(np.nanmean(r.alignment)) for r in done if np.isfinite(r.alignment).any()]
    latency = {}
    steps = [t for r in done for t in r.timings]
    for ph in PHASES:
        v = np.array([t[ph] for t in steps if ph in t])
        if v.size:
            latency[ph] = {"p50": float(np.percentile(v, 50)), "p99": float(np.percentile(v, 99))}
    rmse = [r.rmse() for r in done if r.position_errors.size]
    dr = [r.dead_reckoning_error for r in done if math.isfinite(r.dead_reckoning_error)]
    return {
        "std_convention": "population (divide by n)",
        "laps": len(results),
        "completed": len(done),
        "dnf": len(results) - len(done),
        "lap_time": {"mean": lt_mu, "std": lt_sd},
        "lateral_error_m": {"mean": err_mu, "std": err_sd},
        "alignment_pct": {"mean": float(np.mean(per_lap_align)) if per_lap_align else math.nan},
        "position_rmse_m": {"mean": float(np.mean(rmse)) if rmse else math.nan},
        "dead_reckoning_error_m": {"mean": float(np.mean(dr)) if dr else math.nan},
        "latency_ms": latency,
    }
