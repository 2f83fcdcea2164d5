"""Expected-range computation: an exact marching caster and a range lookup table.

The exact caster walks the ray in half-cell steps and stops at the first
sample that lands in a blocked (OCCUPIED or UNKNOWN) cell or leaves the map.
The lookup table stores that same cast for every FREE cell center and every
angular bin center, so a query is a single indexed read regardless of how far
the ray travels.
"""

from __future__ import annotations

import math
import struct
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numba as nb
import numpy as np

from .geometry import Pose2D, TWO_PI
from .grid import OccupancyGrid

warnings.filterwarnings("ignore", message="The TBB threading layer")

LUT_MAGIC = b"RLUT"
LUT_VERSION = 1
_HEADER = struct.Struct("<4sHIIIddddddd")
DEFAULT_NTHETA = 360
DEFAULT_MAX_BYTES = 2 << 30


class LUTError(RuntimeError):
    pass


@nb.njit(cache=True)
def _cast(blocked, res, ox, oy, oc, os_, x, y, angle, max_range):
    step = 0.5 * res
    ca, sa = math.cos(angle), math.sin(angle)
    h, w = blocked.shape
    nsteps = int(max_range / step)
    for i in range(nsteps + 1):
        t = i * step
        px = x + t * ca - ox
        py = y + t * sa - oy
        gx = math.floor((oc * px + os_ * py) / res)
        gy = math.floor((-os_ * px + oc * py) / res)
        if gx < 0 or gy < 0 or gx >= w or gy >= h:
            return t
        if blocked[int(gy), int(gx)]:
            return t
    return max_range


@nb.njit(cache=True)
def _cast_batch(blocked, res, ox, oy, oc, os_, xs, ys, angles, max_range):
    out = np.empty(xs.shape[0])
    for i in range(xs.shape[0]):
        out[i] = _cast(blocked, res, ox, oy, oc, os_, xs[i], ys[i], angles[i], max_range)
    return out


@nb.njit(cache=True, parallel=True)
def _build_table(blocked, res, ox, oy, oc, os_, fx, fy, ntheta, theta0, max_range, quantum, out):
    binw = 2.0 * math.pi / ntheta
    for j in nb.prange(fx.shape[0]):
        ix, iy = fx[j], fy[j]
        gx = (ix + 0.5) * res
        gy = (iy + 0.5) * res
        x = ox + oc * gx - os_ * gy
        y = oy + os_ * gx + oc * gy
        for k in range(ntheta):
            r = _cast(blocked, res, ox, oy, oc, os_, x, y, theta0 + k * binw, max_range)
            out[iy, ix, k] = np.uint16(round(r / quantum))


@nb.njit(cache=True)
def _lut_lookup(values, res, ox, oy, oc, os_, ntheta, theta0, quantum, x, y, angle):
    """Range for a world-frame ray, or -1.0 when the origin is off the table."""
    px, py = x - ox, y - oy
    gx = math.floor((oc * px + os_ * py) / res)
    gy = math.floor((-os_ * px + oc * py) / res)
    if gx < 0 or gy < 0 or gx >= values.shape[1] or gy >= values.shape[0]:
        return -1.0
    k = int(round((angle - theta0) * ntheta / (2.0 * math.pi))) % ntheta
    return values[int(gy), int(gx), k] * quantum


@nb.njit(cache=True)
def _lut_batch(values, res, ox, oy, oc, os_, ntheta, theta0, quantum, xs, ys, angles):
    out = np.empty(xs.shape[0])
    for i in range(xs.shape[0]):
        out[i] = _lut_lookup(values, res, ox, oy, oc, os_, ntheta, theta0, quantum,
                             xs[i], ys[i], angles[i])
    return out


def _frame(grid_or_lut):
    o = grid_or_lut.origin
    return (grid_or_lut.resolution, o.x, o.y, math.cos(o.theta), math.sin(o.theta))


def cast_exact(grid: OccupancyGrid, pose: Pose2D, bearing: float, max_range: float) -> float:
    """Distance from `pose` along ``pose.theta + bearing`` to the first blocked cell."""
    if not grid.in_bounds(pose.x, pose.y):
        raise ValueError(f"pose ({pose.x:.3f}, {pose.y:.3f}) is outside the map")
    return float(_cast(grid.blocked, *_frame(grid), pose.x, pose.y, pose.theta + bearing,
                       float(max_range)))


def cast_many(grid: OccupancyGrid, xs, ys, angles, max_range: float) -> np.ndarray:
    """Vectorized exact casts for world-frame rays; off-map origins return 0."""
    xs, ys, angles = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64) for a in (xs, ys, angles)))
    shape = xs.shape
    out = _cast_batch(grid.blocked, *_frame(grid), xs.ravel().copy(), ys.ravel().copy(),
                      angles.ravel().copy(), float(max_range))
    return out.reshape(shape)


@dataclass(eq=False)
class RangeLUT:
    """Quantized expected ranges indexed ``values[iy, ix, itheta]``."""

    values: np.ndarray
    resolution: float
    origin: Pose2D
    ntheta: int
    max_range: float
    theta0: float = 0.0
    quantum: float = 0.0
    build_seconds: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if self.ntheta < 1:
            raise LUTError("ntheta must be >= 1")
        if self.quantum <= 0.0:
            self.quantum = self.resolution / 4.0

    @property
    def ny(self) -> int:
        return self.values.shape[0]

    @property
    def nx(self) -> int:
        return self.values.shape[1]

    @property
    def nbytes(self) -> int:
        return self.values.nbytes

    @property
    def bin_width(self) -> float:
        return TWO_PI / self.ntheta

    def kernel_args(self):
        return (self.values, *_frame(self), self.ntheta, self.theta0, self.quantum)

    def bin_center(self, k: int) -> float:
        return self.theta0 + k * self.bin_width

    def save(self, path) -> Path:
        path = Path(path)
        o = self.origin
        header = _HEADER.pack(LUT_MAGIC, LUT_VERSION, self.nx, self.ny, self.ntheta,
                              self.resolution, self.max_range, self.theta0,
                              o.x, o.y, o.theta, self.quantum)
        tmp = path.with_name(path.name + ".part")
        with open(tmp, "wb") as f:
            f.write(header)
            f.write(self.values.astype("<u2", copy=False).tobytes(order="C"))
        tmp.replace(path)
        return path

    @classmethod
    def load(cls, path) -> "RangeLUT":
        with open(path, "rb") as f:
            head = f.read(_HEADER.size)
            if len(head) < _HEADER.size:
                raise LUTError(f"{path}: truncated header")
            (magic, version, nx, ny, ntheta, res, max_range, theta0,
             ox, oy, oth, quantum) = _HEADER.unpack(head)
            if magic != LUT_MAGIC:
                raise LUTError(f"{path}: not a range LUT file")
            if version != LUT_VERSION:
                raise LUTError(f"{path}: unsupported LUT version {version}")
            payload = np.frombuffer(f.read(), dtype="<u2")
        if payload.size != nx * ny * ntheta:
            raise LUTError(f"{path}: payload has {payload.size} entries, expected {nx * ny * ntheta}")
        values = payload.astype(np.uint16).reshape(ny, nx, ntheta)
        return cls(values, res, Pose2D(ox, oy, oth), ntheta, max_range, theta0, quantum)


def build_lut(grid: OccupancyGrid, ntheta: int = DEFAULT_NTHETA, max_range: float = 10.0,
              max_bytes: int = DEFAULT_MAX_BYTES, theta0: float = 0.0) -> RangeLUT:
    """Precompute exact casts from every FREE cell center at every bin center.

    Blocked source cells store 0.  Raises LUTError before allocating anything if
    the table would exceed `max_bytes`.
    """
    if ntheta < 1:
        raise LUTError("ntheta must be >= 1")
    quantum = grid.resolution / 4.0
    if max_range / quantum > np.iinfo(np.uint16).max:
        raise LUTError(f"max_range {max_range} m does not fit 16-bit ranges at {quantum} m quanta")
    nbytes = grid.width * grid.height * ntheta * 2
    if nbytes > max_bytes:
        raise LUTError(f"LUT needs {nbytes / 2**20:.1f} MiB, over the {max_bytes / 2**20:.1f} MiB cap")
    t0 = time.perf_counter()
    values = np.zeros((grid.height, grid.width, ntheta), dtype=np.uint16)
    fx, fy = grid.free_cells()
    _build_table(grid.blocked, *_frame(grid), fx.astype(np.int64), fy.astype(np.int64),
                 int(ntheta), float(theta0), float(max_range), quantum, values)
    lut = RangeLUT(values, grid.resolution, grid.origin, int(ntheta), float(max_range),
                   float(theta0), quantum)
    lut.build_seconds = time.perf_counter() - t0
    return lut


def query_lut(lut: RangeLUT, pose: Pose2D, bearing: float) -> float:
    r = _lut_lookup(*lut.kernel_args(), pose.x, pose.y, pose.theta + bearing)
    if r < 0.0:
        raise ValueError(f"pose ({pose.x:.3f}, {pose.y:.3f}) is outside the LUT")
    return float(r)


def query_many(lut: RangeLUT, xs, ys, angles) -> np.ndarray:
    """Vectorized LUT queries for world-frame rays; off-table origins return -1."""
    xs, ys, angles = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64) for a in (xs, ys, angles)))
    out = _lut_batch(*lut.kernel_args(), xs.ravel().copy(), ys.ravel().copy(), angles.ravel().copy())
    return out.reshape(xs.shape)
