import math

import numpy as np
import pytest

from racemcl.geometry import Pose2D
from racemcl.grid import FREE, OCCUPIED, UNKNOWN, OccupancyGrid
from racemcl.raycast import build_lut
from racemcl.sim.track import fixture_track

# acceptance tests register their verdicts here; printed at the end of the session
ACCEPTANCE = {}


def record(name: str, ok: bool, detail: str):
    ACCEPTANCE[name] = (ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture(scope="session")
def oval():
    return fixture_track("oval")


@pytest.fixture(scope="session")
def hairpin():
    return fixture_track("hairpin")


@pytest.fixture(scope="session")
def oval_lut(oval):
    return build_lut(oval.grid, 360, 10.0)


def make_grid(cells, resolution=0.05, origin=Pose2D()):
    return OccupancyGrid(np.asarray(cells, dtype=np.uint8), resolution, origin)


def corridor_grid(length=4.0, width=1.0, resolution=0.05, wall=2, pad_unknown=True):
    """Straight corridor along +x, FREE inside, OCCUPIED side walls, UNKNOWN outside."""
    nx = int(round(length / resolution))
    inner = int(round(width / resolution))
    ny = inner + 2 * wall + (2 if pad_unknown else 0)
    cells = np.full((ny, nx), UNKNOWN if pad_unknown else OCCUPIED, dtype=np.uint8)
    lo = 1 if pad_unknown else 0
    cells[lo:lo + wall, :] = OCCUPIED
    cells[lo + wall:lo + wall + inner, :] = FREE
    cells[lo + wall + inner:lo + 2 * wall + inner, :] = OCCUPIED
    cells[:, 0] = OCCUPIED
    cells[:, -1] = OCCUPIED
    return make_grid(cells, resolution)


def corridor_center(grid, x=None):
    free_rows = np.where(grid.cells[:, grid.width // 2] == FREE)[0]
    y = (free_rows[0] + free_rows[-1] + 1) / 2 * grid.resolution
    return Pose2D(grid.width * grid.resolution / 2 if x is None else x, y, 0.0)


def room_grid(n=60, resolution=0.05):
    """Square room with an off-center block, so it has no rotational symmetry."""
    cells = np.full((n, n), FREE, dtype=np.uint8)
    cells[0, :] = cells[-1, :] = OCCUPIED
    cells[:, 0] = cells[:, -1] = OCCUPIED
    cells[8:18, 36:50] = OCCUPIED
    cells[40:44, 10:14] = OCCUPIED
    return make_grid(cells, resolution)


def circular_resultant(theta, w=None):
    w = np.ones_like(theta) / theta.size if w is None else w
    return math.hypot(float(w @ np.cos(theta)), float(w @ np.sin(theta)))
