"""Monte-Carlo localization for high-speed race cars on occupancy-grid maps."""

from .geometry import Pose2D
from .grid import OccupancyGrid, load_map, load_map_yaml
from .motion import MotionParams, OdometryDelta, decompose_odometry
from .raycast import RangeLUT, build_lut, cast_exact, query_lut

__all__ = ["Pose2D", "OccupancyGrid", "load_map", "load_map_yaml", "MotionParams",
           "OdometryDelta", "decompose_odometry", "RangeLUT", "build_lut", "cast_exact", "query_lut"]
__version__ = "0.1.0"
