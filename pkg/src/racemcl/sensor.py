"""Scanline selection and beam-model scoring of particles against a scan."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .geometry import Pose2D, TWO_PI
from .grid import OccupancyGrid
from .raycast import RangeLUT, _cast, _frame, _lut_lookup

DEFAULT_FLOOR = -80.0
DEFAULT_SQUASH = 1.0 / 2.2


@dataclass(frozen=True)
class ScanMeta:
    angle_min: float
    angle_increment: float
    n_beams: int
    range_max: float

    @property
    def angle_max(self) -> float:
        return self.angle_min + (self.n_beams - 1) * self.angle_increment

    def bearings(self) -> np.ndarray:
        return self.angle_min + np.arange(self.n_beams) * self.angle_increment


# 270 degree, 1080 beam scanner typical of 1:10 race cars
DEFAULT_SCAN_META = ScanMeta(-0.75 * math.pi, 1.5 * math.pi / 1080, 1080, 10.0)


@dataclass(frozen=True, eq=False)
class ScanFrame:
    stamp: float
    angle_min: float
    angle_increment: float
    ranges: np.ndarray
    range_max: float

    def __post_init__(self):
        r = np.array(self.ranges, dtype=np.float64)
        if r.ndim != 1 or r.size < 1:
            raise ValueError("scan needs at least one range")
        bad = ~np.isfinite(r)
        r[bad] = self.range_max
        r = np.clip(r, 0.0, self.range_max)
        r.setflags(write=False)
        object.__setattr__(self, "ranges", r)

    @property
    def meta(self) -> ScanMeta:
        return ScanMeta(self.angle_min, self.angle_increment, len(self.ranges), self.range_max)

    def to_dict(self) -> dict:
        return {"stamp": self.stamp, "angle_min": self.angle_min,
                "angle_increment": self.angle_increment, "range_max": self.range_max,
                "ranges": [round(float(r), 5) for r in self.ranges]}

    @classmethod
    def from_dict(cls, d: dict) -> "ScanFrame":
        return cls(float(d["stamp"]), float(d["angle_min"]), float(d["angle_increment"]),
                   np.asarray(d["ranges"], dtype=float), float(d["range_max"]))


@dataclass(frozen=True, eq=False)
class ScanlineLayout:
    indices: np.ndarray
    bearings: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.size > 1 and np.any(np.diff(idx) <= 0):
            raise ValueError("layout indices must be strictly increasing")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "bearings", np.asarray(self.bearings, dtype=np.float64))

    @property
    def k(self) -> int:
        return len(self.indices)

    def shuffled(self, rng) -> "ScanlineLayout":
        """Same beams, different order; only for order-invariance checks."""
        p = rng.permutation(self.k)
        obj = object.__new__(ScanlineLayout)
        object.__setattr__(obj, "indices", self.indices[p])
        object.__setattr__(obj, "bearings", self.bearings[p])
        return obj


def _layout(meta: ScanMeta, idx) -> ScanlineLayout:
    idx = np.asarray(idx, dtype=np.int64)
    return ScanlineLayout(idx, meta.angle_min + idx * meta.angle_increment)


def layout_uniform(meta: ScanMeta, k: int) -> ScanlineLayout:
    """K beams at a constant index stride of n_beams / K."""
    if k < 1:
        raise ValueError("K must be >= 1")
    if k > meta.n_beams:
        raise ValueError(f"K={k} exceeds the {meta.n_beams} available beams")
    return _layout(meta, (np.arange(k) * meta.n_beams) // k)


def _perimeter_point(s: float, half_len: float, half_wid: float):
    """Point at arc length s (counter-clockwise) from the forward midpoint of the box."""
    edges = (half_wid, 2 * half_len, 2 * half_wid, 2 * half_len, half_wid)
    s = s % (4 * half_len + 4 * half_wid)
    if s <= edges[0]:
        return half_len, s
    s -= edges[0]
    if s <= edges[1]:
        return half_len - s, half_wid
    s -= edges[1]
    if s <= edges[2]:
        return -half_len, half_wid - s
    s -= edges[2]
    if s <= edges[3]:
        return -half_len + s, -half_wid
    s -= edges[3]
    return half_len, -half_wid + s


def _arc_at_bearing(bearing: float, half_len: float, half_wid: float) -> float:
    """Counter-clockwise arc length from the forward midpoint to the ray at `bearing`."""
    b = bearing % TWO_PI
    c, s = math.cos(b), math.sin(b)
    tx = half_len / abs(c) if abs(c) > 1e-15 else math.inf
    ty = half_wid / abs(s) if abs(s) > 1e-15 else math.inf
    t = min(tx, ty)
    x, y = t * c, t * s
    per = 4 * half_len + 4 * half_wid
    if tx <= ty:
        if x > 0:
            return y % per
        return half_wid + 2 * half_len + (half_wid - y)
    if y > 0:
        return half_wid + (half_len - x)
    return 3 * half_wid + 2 * half_len + (x + half_len)


def boxed_bearings(meta: ScanMeta, k: int, aspect: float) -> np.ndarray:
    """Ideal (unsnapped) bearings whose rays hit the corridor box at equal arc spacing."""
    half_len, half_wid = 0.5, 0.5 * aspect
    per = 4 * half_len + 4 * half_wid
    if meta.n_beams * meta.angle_increment >= TWO_PI - 1e-9:
        s = np.arange(k) * (per / k)
        s = np.where(s > per / 2 + 1e-12, s - per, s)
    else:
        s_hi = _arc_at_bearing(meta.angle_max, half_len, half_wid)
        s_lo = _arc_at_bearing(meta.angle_min, half_len, half_wid) - per
        step = (s_hi - s_lo) / k
        j_max = int(math.floor(s_hi / step + 1e-9))
        j_min = int(math.ceil(s_lo / step - 1e-9))
        js = sorted(range(j_min, j_max + 1), key=lambda j: (abs(j), -j))[:k]
        s = np.array(sorted(js), dtype=float) * step
    pts = np.array([_perimeter_point(v, half_len, half_wid) for v in s])
    return np.arctan2(pts[:, 1], pts[:, 0])


def layout_boxed(meta: ScanMeta, k: int, aspect: float = 0.3) -> ScanlineLayout:
    """Beams whose intersections with a corridor-shaped box are evenly spaced.

    The box has unit length along the sensor's forward axis and width `aspect`.
    Spacing starts at the straight-ahead point and proceeds symmetrically, so
    the forward beam is always selected.
    """
    if not aspect > 0:
        raise ValueError("aspect must be > 0")
    if k < 2:
        raise ValueError("boxed layout needs K >= 2")
    if k > meta.n_beams:
        raise ValueError(f"K={k} exceeds the {meta.n_beams} available beams")
    bearings = boxed_bearings(meta, k, aspect)
    # express relative to angle_min within one turn so wrap-around maps onto valid beams
    rel = (bearings - meta.angle_min) % TWO_PI
    raw = np.clip(np.rint(rel / meta.angle_increment), 0, meta.n_beams - 1).astype(np.int64)
    order = np.argsort(np.abs(bearings), kind="stable")
    taken = np.zeros(meta.n_beams, dtype=bool)
    chosen = []
    for i in order:
        j = raw[i]
        while j < meta.n_beams and taken[j]:
            j += 1
        if j == meta.n_beams:
            j = raw[i]
            while taken[j]:
                j -= 1
        taken[j] = True
        chosen.append(j)
    return _layout(meta, np.sort(chosen))


@dataclass(frozen=True)
class BeamModelParams:
    z_hit: float = 0.75
    z_short: float = 0.10
    z_max: float = 0.07
    z_rand: float = 0.08
    sigma_hit: float = 0.10
    lambda_short: float = 0.5
    bin_width: float = 0.05
    range_max: float = 10.0
    squash: float = DEFAULT_SQUASH


@dataclass(frozen=True, eq=False)
class BeamModelTable:
    """``table[m, e]`` = p(measured bin m | expected bin e); columns sum to one."""

    params: BeamModelParams
    table: np.ndarray
    log_table: np.ndarray = field(repr=False)

    @property
    def nbins(self) -> int:
        return self.table.shape[0]

    @property
    def squash(self) -> float:
        return self.params.squash

    def bin_of(self, r):
        return np.minimum(np.rint(np.asarray(r) / self.params.bin_width), self.nbins - 1).astype(np.int64)


def build_beam_table(params: BeamModelParams = BeamModelParams()) -> BeamModelTable:
    zs = np.array([params.z_hit, params.z_short, params.z_max, params.z_rand])
    if np.any(zs < 0) or abs(zs.sum() - 1.0) > 1e-9:
        raise ValueError(f"mixture weights must be >= 0 and sum to 1, got {zs.tolist()}")
    if not params.sigma_hit > 0 or not params.bin_width > 0 or params.lambda_short < 0:
        raise ValueError("sigma_hit and bin_width must be > 0, lambda_short >= 0")
    nbins = int(round(params.range_max / params.bin_width)) + 1
    if nbins < 2:
        raise ValueError("need at least 2 range bins")
    r = np.arange(nbins) * params.bin_width
    m, e = r[:, None], r[None, :]

    hit = np.exp(-0.5 * ((m - e) / params.sigma_hit) ** 2)
    hit /= hit.sum(axis=0, keepdims=True)
    short = np.where(m < e, params.lambda_short * np.exp(-params.lambda_short * m), 0.0)
    ssum = short.sum(axis=0, keepdims=True)
    short = np.divide(short, ssum, out=np.zeros_like(short), where=ssum > 0)
    mx = np.zeros((nbins, nbins))
    mx[-1, :] = 1.0
    rand = np.full((nbins, nbins), 1.0 / nbins)

    table = params.z_hit * hit + params.z_short * short + params.z_max * mx + params.z_rand * rand
    col = table.sum(axis=0, keepdims=True)
    if np.any(col <= 0):
        raise ValueError("beam model has an all-zero column")
    table /= col
    with np.errstate(divide="ignore"):
        log_table = np.log(table)
    return BeamModelTable(params, table, log_table)


@nb.njit(cache=True)
def _lidar_pose(px, py, pth, offx, offy, offth):
    c, s = math.cos(pth), math.sin(pth)
    return px + c * offx - s * offy, py + s * offx + c * offy, pth + offth


@nb.njit(cache=True)
def _weigh_lut(poses, offx, offy, offth, bearings, mbins, log_table, binw, floor, squash,
               values, res, ox, oy, oc, os_, ntheta, theta0, quantum, out):
    nb_ = log_table.shape[0]
    for i in range(poses.shape[0]):
        lx, ly, lth = _lidar_pose(poses[i, 0], poses[i, 1], poses[i, 2], offx, offy, offth)
        acc = 0.0
        lost = False
        for k in range(bearings.shape[0]):
            r = _lut_lookup(values, res, ox, oy, oc, os_, ntheta, theta0, quantum,
                            lx, ly, lth + bearings[k])
            if r < 0.0:
                lost = True
                break
            eb = int(round(r / binw))
            if eb >= nb_:
                eb = nb_ - 1
            acc += log_table[mbins[k], eb]
        out[i] = floor if lost else squash * acc


@nb.njit(cache=True)
def _weigh_exact(poses, offx, offy, offth, bearings, mbins, log_table, binw, floor, squash,
                 blocked, res, ox, oy, oc, os_, max_range, out):
    nb_ = log_table.shape[0]
    h, w = blocked.shape
    for i in range(poses.shape[0]):
        lx, ly, lth = _lidar_pose(poses[i, 0], poses[i, 1], poses[i, 2], offx, offy, offth)
        px, py = lx - ox, ly - oy
        gx = math.floor((oc * px + os_ * py) / res)
        gy = math.floor((-os_ * px + oc * py) / res)
        if gx < 0 or gy < 0 or gx >= w or gy >= h:
            out[i] = floor
            continue
        acc = 0.0
        for k in range(bearings.shape[0]):
            r = _cast(blocked, res, ox, oy, oc, os_, lx, ly, lth + bearings[k], max_range)
            eb = int(round(r / binw))
            if eb >= nb_:
                eb = nb_ - 1
            acc += log_table[mbins[k], eb]
        out[i] = squash * acc


BACKENDS = ("lut", "exact")


@dataclass(eq=False)
class SensorModel:
    """Everything needed to score particles: layout, beam table, range backend, extrinsics."""

    layout: ScanlineLayout
    table: BeamModelTable
    lut: RangeLUT | None = None
    grid: OccupancyGrid | None = None
    lidar_offset: Pose2D = field(default_factory=Pose2D)
    backend: str = "lut"
    floor: float = DEFAULT_FLOOR

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}")
        if self.backend == "lut" and self.lut is None:
            raise ValueError("lut backend requires a RangeLUT")
        if self.backend == "exact" and self.grid is None:
            raise ValueError("exact backend requires an OccupancyGrid")

    @property
    def max_range(self) -> float:
        return self.table.params.range_max

    def measured_bins(self, scan: ScanFrame) -> np.ndarray:
        if self.layout.k and self.layout.indices.max() >= len(scan.ranges):
            raise ValueError(f"scan has {len(scan.ranges)} beams, layout expects index "
                             f"{self.layout.indices.max()}")
        return self.table.bin_of(scan.ranges[self.layout.indices])

    def weigh(self, poses: np.ndarray, scan: ScanFrame) -> np.ndarray:
        """Log-weights for an (N, 3) array of rear-axle poses."""
        poses = np.ascontiguousarray(poses, dtype=np.float64)
        out = np.empty(poses.shape[0])
        mb = self.measured_bins(scan)
        o = self.lidar_offset
        common = (poses, o.x, o.y, o.theta, self.layout.bearings, mb, self.table.log_table,
                  self.table.params.bin_width, self.floor, self.table.squash)
        if self.backend == "lut":
            _weigh_lut(*common, *self.lut.kernel_args(), out)
        else:
            _weigh_exact(*common, self.grid.blocked, *_frame(self.grid), self.max_range, out)
        return out


def weigh_particle(pose: Pose2D, scan: ScanFrame, layout: ScanlineLayout, lut: RangeLUT,
                   table: BeamModelTable, lidar_offset: Pose2D = Pose2D(),
                   floor: float = DEFAULT_FLOOR) -> float:
    model = SensorModel(layout, table, lut=lut, lidar_offset=lidar_offset, floor=floor)
    return float(model.weigh(pose.as_array()[None, :], scan)[0])
