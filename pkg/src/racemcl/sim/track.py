"""Track bundles: occupancy map + centerline + raceline with a speed profile.

Tracks are generated from turtle-style primitives (straights and constant
radius arcs), rasterized into a map whose driveable band is FREE, bordered by
OCCUPIED walls, with UNKNOWN everywhere else.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from ..geometry import Pose2D
from ..grid import FREE, OCCUPIED, UNKNOWN, OccupancyGrid, load_map_yaml, save_map

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "data" / "tracks"
TRACK_KINDS = ("oval", "hairpin")

# (length m, signed curvature 1/m); the sequences close on themselves
_PRIMITIVES = {
    "oval": [(10.0, 0.0), (math.pi * 2.5, 1 / 2.5), (10.0, 0.0), (math.pi * 2.5, 1 / 2.5)],
    "hairpin": [(12.0, 0.0), (math.pi * 2.0, 1 / 2.0), (4.0, 0.0), (math.pi * 1.0, -1 / 1.0),
                (3.0, 0.0), (math.pi * 1.5, 1 / 1.5), (11.0, 0.0), (math.pi, 1 / 2.0),
                (5.0, 0.0), (math.pi, 1 / 2.0)],
}
_WIDTHS = {"oval": 1.6, "hairpin": 1.4}


@dataclass(frozen=True)
class SpeedLimits:
    v_max: float = 7.6
    a_lat: float = 7.0
    a_acc: float = 5.0
    a_brake: float = 6.0


@dataclass(eq=False)
class Track:
    name: str
    grid: OccupancyGrid
    centerline: np.ndarray   # (M, 2), closed
    raceline: np.ndarray     # (M, 3) x, y, v; closed (first row == last row)

    @property
    def length(self) -> float:
        return float(np.sum(np.hypot(*np.diff(self.raceline[:, :2], axis=0).T)))

    def start_pose(self) -> Pose2D:
        p0, p1 = self.raceline[0, :2], self.raceline[1, :2]
        return Pose2D(p0[0], p0[1], math.atan2(p1[1] - p0[1], p1[0] - p0[0]))


def turtle_path(primitives, ds: float) -> np.ndarray:
    """Integrate (length, curvature) primitives from the origin heading +x."""
    pts = [(0.0, 0.0)]
    x = y = th = 0.0
    for length, kappa in primitives:
        n = max(1, int(math.ceil(length / ds)))
        h = length / n
        for _ in range(n):
            if kappa == 0.0:
                x += h * math.cos(th)
                y += h * math.sin(th)
            else:
                dth = kappa * h
                x += (math.sin(th + dth) - math.sin(th)) / kappa
                y += (math.cos(th) - math.cos(th + dth)) / kappa
                th += dth
            pts.append((x, y))
    path = np.array(pts)
    path[-1] = path[0]
    return path


def offset_polyline(path: np.ndarray, offset: float) -> np.ndarray:
    """Shift a closed polyline laterally (positive = left of travel direction)."""
    if offset == 0.0:
        return path.copy()
    p = path[:-1]
    tangent = np.roll(p, -1, axis=0) - np.roll(p, 1, axis=0)
    tangent /= np.linalg.norm(tangent, axis=1, keepdims=True)
    normal = np.column_stack([-tangent[:, 1], tangent[:, 0]])
    out = p + offset * normal
    return np.vstack([out, out[:1]])


def curvature(path: np.ndarray) -> np.ndarray:
    """Unsigned curvature at each vertex of a closed polyline (circumcircle of neighbors)."""
    p = path[:-1]
    a, b, c = np.roll(p, 1, axis=0), p, np.roll(p, -1, axis=0)
    ab, bc, ca = (np.linalg.norm(b - a, axis=1), np.linalg.norm(c - b, axis=1),
                  np.linalg.norm(a - c, axis=1))
    cross = np.abs((b - a)[:, 0] * (c - a)[:, 1] - (b - a)[:, 1] * (c - a)[:, 0])
    k = 2.0 * cross / np.maximum(ab * bc * ca, 1e-12)
    return np.append(k, k[0])


def speed_profile(path: np.ndarray, limits: SpeedLimits = SpeedLimits()) -> np.ndarray:
    """Curvature-limited speeds with trapezoidal accel/brake passes around the loop."""
    k = curvature(path)[:-1]
    v = np.minimum(limits.v_max, np.sqrt(limits.a_lat / np.maximum(k, 1e-9)))
    ds = np.hypot(*np.diff(path, axis=0).T)
    n = len(v)
    for _ in range(2):
        for i in range(n):
            j = (i + 1) % n
            v[j] = min(v[j], math.sqrt(v[i] ** 2 + 2 * limits.a_acc * ds[i]))
        for i in range(n - 1, -1, -1):
            j = (i + 1) % n
            v[i] = min(v[i], math.sqrt(v[j] ** 2 + 2 * limits.a_brake * ds[i]))
    return np.append(v, v[0])


def rasterize(centerline: np.ndarray, half_width: float, wall: float = 0.15,
              resolution: float = 0.05, margin: float = 0.6) -> OccupancyGrid:
    lo = centerline.min(axis=0) - half_width - wall - margin
    hi = centerline.max(axis=0) + half_width + wall + margin
    lo = np.floor(lo / resolution) * resolution
    w, h = (np.ceil((hi - lo) / resolution)).astype(int)
    # dense resampling so the distance field is accurate to a fraction of a cell
    seg = np.hypot(*np.diff(centerline, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    fine = np.arange(0.0, s[-1], resolution / 4)
    pts = np.column_stack([np.interp(fine, s, centerline[:, 0]), np.interp(fine, s, centerline[:, 1])])
    mark = np.ones((h, w), dtype=bool)
    ix = np.floor((pts[:, 0] - lo[0]) / resolution).astype(int)
    iy = np.floor((pts[:, 1] - lo[1]) / resolution).astype(int)
    mark[iy, ix] = False
    dist = ndimage.distance_transform_edt(mark) * resolution
    cells = np.full((h, w), UNKNOWN, dtype=np.uint8)
    cells[dist <= half_width + wall] = OCCUPIED
    cells[dist <= half_width] = FREE
    return OccupancyGrid(cells, resolution, Pose2D(float(lo[0]), float(lo[1]), 0.0))


def generate_track(kind: str, resolution: float = 0.05, raceline_offset: float = 0.0,
                   limits: SpeedLimits = SpeedLimits()) -> Track:
    if kind not in _PRIMITIVES:
        raise ValueError(f"unknown track kind {kind!r}; expected one of {TRACK_KINDS}")
    center = turtle_path(_PRIMITIVES[kind], ds=0.05)
    grid = rasterize(center, 0.5 * _WIDTHS[kind], resolution=resolution)
    race = offset_polyline(center, raceline_offset)
    v = speed_profile(race, limits)
    return Track(kind, grid, center, np.column_stack([race, v]))


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(header)
        for r in rows:
            wr.writerow([f"{v:.6f}" for v in r])


def _read_csv(path: Path, ncols: int) -> np.ndarray:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise ValueError(f"{path}: empty file")
    data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    if data.ndim != 2 or data.shape[1] != ncols:
        raise ValueError(f"{path}: expected {ncols} columns")
    return data


def save_track(track: Track, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_map(track.grid, out / "map.yaml", "map.pgm")
    _write_csv(out / "raceline.csv", ["x", "y", "v"], track.raceline)
    _write_csv(out / "centerline.csv", ["x", "y"], track.centerline)
    return out


def load_track(bundle_dir) -> Track:
    d = Path(bundle_dir)
    if not (d / "map.yaml").is_file():
        raise FileNotFoundError(f"no track bundle at {d}")
    grid = load_map_yaml(d / "map.yaml")
    race = _read_csv(d / "raceline.csv", 3)
    center = _read_csv(d / "centerline.csv", 2) if (d / "centerline.csv").is_file() else race[:, :2]
    return Track(d.name, grid, center, race)


def fixture_track(name: str) -> Track:
    return load_track(FIXTURE_DIR / name)


def resolve_track(name_or_path: str) -> Track:
    p = Path(name_or_path)
    if p.is_dir():
        return load_track(p)
    if (FIXTURE_DIR / name_or_path).is_dir():
        return fixture_track(name_or_path)
    raise FileNotFoundError(f"track {name_or_path!r} is neither a bundle directory nor a fixture")
