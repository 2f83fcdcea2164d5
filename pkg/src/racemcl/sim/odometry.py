"""Wheel-odometry corruption emulating tire slip."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import Pose2D
from ..motion import OdometryDelta, advance, decompose_odometry


@dataclass(frozen=True)
class SlipProfile:
    trans_scale: float = 1.0   # reported / true distance
    trans_noise: float = 0.0   # relative std of reported distance
    rot_noise: float = 0.0     # rad of rotation noise std per meter travelled

    def __post_init__(self):
        if not self.trans_scale > 0:
            raise ValueError("trans_scale must be > 0")
        if self.trans_noise < 0 or self.rot_noise < 0:
            raise ValueError("slip noise terms must be >= 0")


IDENTITY = SlipProfile()
HQ = SlipProfile(1.0, 0.01, 0.005)
LQ = SlipProfile(1.3, 0.05, 0.05)


def corrupt_odometry(true_prev: Pose2D, true_curr: Pose2D, odom_prev: Pose2D,
                     slip: SlipProfile, rng: np.random.Generator) -> Pose2D:
    """Reported odometry pose after one step: the true increment, corrupted, integrated."""
    d = decompose_odometry(true_prev, true_curr)
    z = rng.standard_normal(3)
    trans = d.trans * slip.trans_scale * (1.0 + slip.trans_noise * z[0])
    sd_rot = slip.rot_noise * d.trans
    rot1 = d.rot1 + sd_rot * z[1]
    rot2 = d.rot2 + sd_rot * z[2]
    return advance(odom_prev, OdometryDelta(rot1, max(trans, 0.0), rot2))
