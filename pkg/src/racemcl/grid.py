"""Occupancy-grid maps: loading, saving and coordinate transforms.

Maps use the usual robotics convention of an 8-bit grayscale image (PGM or
PNG) plus a YAML sidecar carrying ``image``, ``resolution``, ``origin``,
``occupied_thresh``, ``free_thresh`` and ``negate``.  Cells are stored as a
``(height, width)`` array whose row 0 is the *bottom* of the map, so that
``cells[iy, ix]`` grows with world y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from PIL import Image
from scipy import ndimage

from .geometry import Pose2D

FREE = 0
OCCUPIED = 1
UNKNOWN = 2

DEFAULT_OCCUPIED_THRESH = 0.65
DEFAULT_FREE_THRESH = 0.196


class MapError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    cells: np.ndarray
    resolution: float
    origin: Pose2D = field(default_factory=Pose2D)

    def __post_init__(self):
        cells = np.ascontiguousarray(self.cells, dtype=np.uint8)
        if cells.ndim != 2 or cells.shape[0] < 1 or cells.shape[1] < 1:
            raise MapError(f"cells must be a non-empty 2D array, got shape {cells.shape}")
        if not self.resolution > 0:
            raise MapError(f"resolution must be positive, got {self.resolution}")
        if cells.size and cells.max() > UNKNOWN:
            raise MapError("cell values must be FREE(0), OCCUPIED(1) or UNKNOWN(2)")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "resolution", float(self.resolution))

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def blocked(self) -> np.ndarray:
        """Cells a ray cannot pass: OCCUPIED and, conservatively, UNKNOWN."""
        return self.cells != FREE

    def world_to_grid(self, x: float, y: float):
        """Cell index ``(ix, iy)`` containing the world point, or None if outside."""
        ix, iy, ok = self.world_to_grid_many(np.array([x]), np.array([y]))
        if not ok[0]:
            return None
        return int(ix[0]), int(iy[0])

    def world_to_grid_many(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        c, s = math.cos(self.origin.theta), math.sin(self.origin.theta)
        dx, dy = x - self.origin.x, y - self.origin.y
        gx = (c * dx + s * dy) / self.resolution
        gy = (-s * dx + c * dy) / self.resolution
        ix = np.floor(gx).astype(np.int64)
        iy = np.floor(gy).astype(np.int64)
        ok = (ix >= 0) & (ix < self.width) & (iy >= 0) & (iy < self.height)
        return ix, iy, ok

    def grid_to_world(self, ix, iy):
        """World coordinates of cell centers."""
        gx = (np.asarray(ix, dtype=float) + 0.5) * self.resolution
        gy = (np.asarray(iy, dtype=float) + 0.5) * self.resolution
        c, s = math.cos(self.origin.theta), math.sin(self.origin.theta)
        return self.origin.x + c * gx - s * gy, self.origin.y + s * gx + c * gy

    def in_bounds(self, x: float, y: float) -> bool:
        return self.world_to_grid(x, y) is not None

    def is_occupied(self, cell) -> bool:
        ix, iy = cell
        if not (0 <= ix < self.width and 0 <= iy < self.height):
            raise IndexError(f"cell {cell} outside {self.width}x{self.height} grid")
        return bool(self.cells[iy, ix] != FREE)

    def free_cells(self) -> tuple[np.ndarray, np.ndarray]:
        iy, ix = np.nonzero(self.cells == FREE)
        return ix, iy

    def distance_to_occupied(self) -> np.ndarray:
        """Euclidean distance (meters) from each cell center to the nearest OCCUPIED cell."""
        occ = self.cells == OCCUPIED
        if not occ.any():
            return np.full(self.cells.shape, np.inf)
        return ndimage.distance_transform_edt(~occ) * self.resolution

    def translated(self, dx: float, dy: float) -> "OccupancyGrid":
        return OccupancyGrid(self.cells, self.resolution,
                             Pose2D(self.origin.x + dx, self.origin.y + dy, self.origin.theta))


def occupancy_from_pixels(pixels: np.ndarray, occupied_thresh: float = DEFAULT_OCCUPIED_THRESH,
                          free_thresh: float = DEFAULT_FREE_THRESH, negate: bool = False) -> np.ndarray:
    """Tri-state cells from an image array (image row order, row 0 at the top)."""
    _check_thresholds(occupied_thresh, free_thresh)
    p = pixels.astype(np.float64)
    occ = p / 255.0 if negate else (255.0 - p) / 255.0
    cells = np.full(pixels.shape, UNKNOWN, dtype=np.uint8)
    cells[occ >= occupied_thresh] = OCCUPIED
    cells[occ <= free_thresh] = FREE
    return cells[::-1].copy()


def _check_thresholds(occupied_thresh, free_thresh):
    for name, v in (("occupied_thresh", occupied_thresh), ("free_thresh", free_thresh)):
        if not 0.0 <= v <= 1.0:
            raise MapError(f"{name}={v} outside [0, 1]")
    if free_thresh >= occupied_thresh:
        raise MapError(f"free_thresh ({free_thresh}) must be below occupied_thresh ({occupied_thresh})")


def read_map_meta(meta_path) -> dict:
    meta_path = Path(meta_path)
    if not meta_path.is_file():
        raise FileNotFoundError(f"map metadata not found: {meta_path}")
    with open(meta_path) as f:
        meta = yaml.safe_load(f) or {}
    if not isinstance(meta, dict):
        raise MapError(f"{meta_path}: metadata must be a mapping")
    return meta


def load_map(image_path, meta_path) -> OccupancyGrid:
    image_path, meta_path = Path(image_path), Path(meta_path)
    meta = read_map_meta(meta_path)
    if not image_path.is_file():
        raise FileNotFoundError(f"map image not found: {image_path}")
    try:
        resolution = float(meta["resolution"])
    except KeyError:
        raise MapError(f"{meta_path}: missing 'resolution'") from None
    origin = meta.get("origin", [0.0, 0.0, 0.0])
    if len(origin) != 3:
        raise MapError(f"{meta_path}: origin must be [x, y, yaw]")
    with Image.open(image_path) as img:
        if img.mode not in ("L", "P") or (img.mode == "P" and img.getpalette() is not None
                                          and not _gray_palette(img)):
            raise MapError(f"{image_path}: expected 8-bit grayscale image, got mode {img.mode}")
        pixels = np.asarray(img.convert("L") if img.mode == "P" else img, dtype=np.uint8)
    cells = occupancy_from_pixels(
        pixels,
        float(meta.get("occupied_thresh", DEFAULT_OCCUPIED_THRESH)),
        float(meta.get("free_thresh", DEFAULT_FREE_THRESH)),
        bool(meta.get("negate", 0)),
    )
    return OccupancyGrid(cells, resolution, Pose2D(*map(float, origin)))


def _gray_palette(img) -> bool:
    pal = np.asarray(img.getpalette()[:768]).reshape(-1, 3)
    return bool(np.all(pal[:, 0] == pal[:, 1]) and np.all(pal[:, 1] == pal[:, 2]))


def load_map_yaml(meta_path) -> OccupancyGrid:
    """Load a map from its metadata file; the image path resolves relative to it."""
    meta_path = Path(meta_path)
    meta = read_map_meta(meta_path)
    if "image" not in meta:
        raise MapError(f"{meta_path}: missing 'image'")
    return load_map(meta_path.parent / meta["image"], meta_path)


def save_map(grid: OccupancyGrid, meta_path, image_name: str | None = None) -> Path:
    """Write the grid as PGM + YAML. Returns the metadata path."""
    meta_path = Path(meta_path)
    image_name = image_name or meta_path.with_suffix(".pgm").name
    pixels = np.full(grid.cells.shape, 205, dtype=np.uint8)
    pixels[grid.cells == FREE] = 254
    pixels[grid.cells == OCCUPIED] = 0
    Image.fromarray(pixels[::-1]).save(meta_path.parent / image_name)
    meta = {
        "image": image_name,
        "resolution": grid.resolution,
        "origin": [grid.origin.x, grid.origin.y, grid.origin.theta],
        "occupied_thresh": DEFAULT_OCCUPIED_THRESH,
        "free_thresh": DEFAULT_FREE_THRESH,
        "negate": 0,
    }
    with open(meta_path, "w") as f:
        yaml.safe_dump(meta, f, sort_keys=False)
    return meta_path
