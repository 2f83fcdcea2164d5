"""Monte-Carlo localization: particle set, predict/update/resample, pose estimate."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from . import rng as rngs
from .geometry import Pose2D, wrap_angle
from .grid import OccupancyGrid
from .motion import MotionParams, OdometryDelta, propagate
from .sensor import ScanFrame, SensorModel

ESTIMATORS = ("mean", "max_weight")


@dataclass(eq=False)
class ParticleSet:
    poses: np.ndarray                 # (N, 3)
    log_weights: np.ndarray           # (N,)
    normalized: bool = True
    ess: float = float("nan")
    lost: bool = False

    def __post_init__(self):
        self.poses = np.asarray(self.poses, dtype=np.float64)
        self.log_weights = np.asarray(self.log_weights, dtype=np.float64)
        if self.poses.ndim != 2 or self.poses.shape[1] != 3 or self.poses.shape[0] < 1:
            raise ValueError("poses must be an (N, 3) array with N >= 1")
        if self.log_weights.shape != (self.poses.shape[0],):
            raise ValueError("log_weights must have one entry per particle")

    @property
    def n(self) -> int:
        return self.poses.shape[0]

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def copy(self) -> "ParticleSet":
        return replace(self, poses=self.poses.copy(), log_weights=self.log_weights.copy())

    @classmethod
    def uniform(cls, poses: np.ndarray) -> "ParticleSet":
        n = len(poses)
        return cls(poses, np.full(n, -math.log(n)), True, float(n))


@dataclass(frozen=True)
class PoseEstimate:
    mean: Pose2D
    covariance: np.ndarray
    stamp: float = 0.0


@dataclass
class StepTiming:
    predict: float = 0.0
    update: float = 0.0
    resample: float = 0.0
    estimate: float = 0.0

    @property
    def total(self) -> float:
        return self.predict + self.update + self.resample + self.estimate

    def as_ms(self) -> dict:
        return {"predict": 1e3 * self.predict, "update": 1e3 * self.update,
                "resample": 1e3 * self.resample, "estimate": 1e3 * self.estimate,
                "total": 1e3 * self.total}


def init_global(grid: OccupancyGrid, n: int, rng: np.random.Generator) -> ParticleSet:
    """N poses uniform over FREE space with uniform heading."""
    fx, fy = grid.free_cells()
    if fx.size == 0:
        raise ValueError("map has no FREE cells")
    pick = rng.integers(0, fx.size, size=n)
    jitter = rng.random((n, 2))
    gx = (fx[pick] + jitter[:, 0]) * grid.resolution
    gy = (fy[pick] + jitter[:, 1]) * grid.resolution
    c, s = math.cos(grid.origin.theta), math.sin(grid.origin.theta)
    poses = np.empty((n, 3))
    poses[:, 0] = grid.origin.x + c * gx - s * gy
    poses[:, 1] = grid.origin.y + s * gx + c * gy
    poses[:, 2] = rng.uniform(-math.pi, math.pi, size=n)
    return ParticleSet.uniform(poses)


def init_pose(p: Pose2D, sigmas, n: int, rng: np.random.Generator,
              grid: OccupancyGrid | None = None) -> ParticleSet:
    """Gaussian ball of N particles around `p` with ``sigmas = (sx, sy, stheta)``."""
    if grid is not None and not grid.in_bounds(p.x, p.y):
        raise ValueError(f"initial pose ({p.x:.3f}, {p.y:.3f}) is outside the map")
    z = rng.standard_normal((n, 3))
    poses = p.as_array()[None, :] + z * np.asarray(sigmas, dtype=float)[None, :]
    poses[:, 2] = wrap_angle(poses[:, 2])
    return ParticleSet.uniform(poses)


def predict(ps: ParticleSet, d: OdometryDelta, model: str, params: MotionParams,
            rng: np.random.Generator) -> ParticleSet:
    return replace(ps, poses=propagate(ps.poses, d, params, model, rng))


def normalize(log_weights: np.ndarray) -> np.ndarray:
    return log_weights - logsumexp(log_weights)


def effective_sample_size(log_weights: np.ndarray) -> float:
    w = np.exp(log_weights)
    return float(1.0 / np.sum(w * w))


def update(ps: ParticleSet, scan: ScanFrame, sensor: SensorModel) -> ParticleSet:
    """Add per-particle scan log-likelihoods, normalize, attach ESS and lost status."""
    scores = sensor.weigh(ps.poses, scan)
    lost = bool(np.all(scores <= sensor.floor))
    if lost:
        lw = np.full(ps.n, -math.log(ps.n))
    else:
        lw = normalize(ps.log_weights + scores)
    return ParticleSet(ps.poses, lw, True, effective_sample_size(lw), lost)


def systematic_indices(weights: np.ndarray, u: float) -> np.ndarray:
    """Low-variance resampling: strata ``(u + i) / N`` against the weight CDF."""
    n = weights.size
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    positions = (u + np.arange(n)) / n
    return np.minimum(np.searchsorted(cdf, positions, side="right"), n - 1)


def resample(ps: ParticleSet, rng: np.random.Generator, ess_frac: float = 0.5,
             force: bool = False) -> tuple[ParticleSet, bool]:
    """Systematic resampling, triggered when ESS < ess_frac * N (or when forced)."""
    ess = ps.ess if math.isfinite(ps.ess) else effective_sample_size(ps.log_weights)
    if not force and ess >= ess_frac * ps.n:
        return ps, False
    idx = systematic_indices(ps.weights, rng.random())
    out = ParticleSet.uniform(ps.poses[idx].copy())
    out.lost = ps.lost
    return out, True


def estimate(ps: ParticleSet, stamp: float = 0.0, method: str = "mean") -> PoseEstimate:
    """Weighted mean (circular in heading) and weighted covariance."""
    w = ps.weights
    w = w / w.sum()
    th = ps.poses[:, 2]
    if method == "max_weight":
        center = ps.poses[int(np.argmax(w))]
        mx, my, mth = center
    elif method == "mean":
        mx = float(w @ ps.poses[:, 0])
        my = float(w @ ps.poses[:, 1])
        mth = math.atan2(float(w @ np.sin(th)), float(w @ np.cos(th)))
    else:
        raise ValueError(f"estimate method must be one of {ESTIMATORS}")
    res = np.column_stack([ps.poses[:, 0] - mx, ps.poses[:, 1] - my, wrap_angle(th - mth)])
    cov = (res * w[:, None]).T @ res
    cov = 0.5 * (cov + cov.T)
    return PoseEstimate(Pose2D(mx, my, mth), cov, stamp)


@dataclass(eq=False)
class FilterContext:
    """Static inputs of a filter run."""

    sensor: SensorModel
    motion_params: MotionParams = field(default_factory=MotionParams)
    model: str = "tum"
    ess_frac: float = 0.5
    estimator: str = "mean"


@dataclass(eq=False)
class ParticleFilter:
    """Stateful wrapper: one writer advances the filter step by step."""

    ctx: FilterContext
    particles: ParticleSet
    seed: int = 0
    count: int = 0
    last: PoseEstimate | None = None

    def step(self, d: OdometryDelta, scan: ScanFrame):
        rng = rngs.stream(self.seed, rngs.FILTER_STEP, self.count)
        self.count += 1
        self.particles, est, timing = step(self.particles, d, scan, self.ctx, rng)
        self.last = est
        return est, timing


def step(ps: ParticleSet, d: OdometryDelta, scan: ScanFrame, ctx: FilterContext,
         rng: np.random.Generator):
    """One predict -> update -> (conditional) resample -> estimate cycle, timed per phase."""
    timing = StepTiming()
    t0 = time.perf_counter()
    ps = predict(ps, d, ctx.model, ctx.motion_params, rng)
    t1 = time.perf_counter()
    ps = update(ps, scan, ctx.sensor)
    t2 = time.perf_counter()
    ps, _ = resample(ps, rng, ctx.ess_frac)
    t3 = time.perf_counter()
    est = estimate(ps, scan.stamp, ctx.estimator)
    t4 = time.perf_counter()
    timing.predict, timing.update, timing.resample, timing.estimate = t1 - t0, t2 - t1, t3 - t2, t4 - t3
    return ps, est, timing
