"""Kinematic bicycle model (rear-axle reference) and a pure-pursuit tracker."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..geometry import Pose2D, wrap_angle


@dataclass(frozen=True)
class CarParams:
    wheelbase: float = 0.324
    max_steer: float = 0.4189
    max_steer_rate: float = 5.0     # rad/s
    max_accel: float = 6.0
    max_decel: float = 8.0


@dataclass(frozen=True)
class CarState:
    pose: Pose2D
    v: float = 0.0
    steer: float = 0.0


def step_car(s: CarState, accel: float, steer_cmd: float, dt: float,
             params: CarParams = CarParams()) -> CarState:
    """Advance the kinematic bicycle by dt, integrating the arc exactly."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    max_d = params.max_steer_rate * dt
    steer = s.steer + min(max(steer_cmd - s.steer, -max_d), max_d)
    steer = min(max(steer, -params.max_steer), params.max_steer)
    accel = min(max(accel, -params.max_decel), params.max_accel)
    v1 = max(0.0, s.v + accel * dt)
    dist = 0.5 * (s.v + v1) * dt
    x, y, th = s.pose.x, s.pose.y, s.pose.theta
    kappa = math.tan(steer) / params.wheelbase
    if abs(kappa * dist) < 1e-12:
        x += dist * math.cos(th)
        y += dist * math.sin(th)
    else:
        dth = kappa * dist
        x += (math.sin(th + dth) - math.sin(th)) / kappa
        y += (math.cos(th) - math.cos(th + dth)) / kappa
        th += dth
    return CarState(Pose2D(x, y, th), v1, steer)


@dataclass(frozen=True)
class PursuitParams:
    lookahead_min: float = 0.5
    lookahead_gain: float = 0.2     # s; lookahead grows with speed
    lookahead_max: float = 2.2
    speed_gain: float = 4.0         # 1/s, proportional speed loop
    speed_scale: float = 1.0


class RacelineFollower:
    """Pure pursuit on a closed raceline with a proportional speed loop.

    Tracks progress (arc length travelled) so callers can detect lap completion.
    """

    def __init__(self, raceline: np.ndarray, params: PursuitParams = PursuitParams(),
                 car: CarParams = CarParams()):
        self.pts = raceline[:-1, :2]
        self.speed = raceline[:-1, 2]
        seg = np.hypot(*np.diff(raceline[:, :2], axis=0).T)
        self.s = np.concatenate([[0.0], np.cumsum(seg)])[:-1]
        self.length = float(seg.sum())
        self.params = params
        self.car = car
        self.index = 0
        self.progress = 0.0

    def _nearest(self, x: float, y: float, window: int = 60) -> int:
        n = len(self.pts)
        idx = (self.index + np.arange(-window // 4, window)) % n
        d = np.hypot(self.pts[idx, 0] - x, self.pts[idx, 1] - y)
        return int(idx[int(np.argmin(d))])

    def observe(self, x: float, y: float) -> int:
        """Update the nearest-index tracker from a (true) position; returns the index."""
        j = self._nearest(x, y)
        ds = self.s[j] - self.s[self.index]
        if ds < -0.5 * self.length:
            ds += self.length
        elif ds > 0.5 * self.length:
            ds -= self.length
        self.progress += ds
        self.index = j
        return j

    def command(self, pose: Pose2D, v: float, index: int | None = None):
        """(accel, steer) for a believed pose."""
        p = self.params
        i = self._nearest(pose.x, pose.y) if index is None else index
        ld = min(max(p.lookahead_min + p.lookahead_gain * v, p.lookahead_min), p.lookahead_max)
        target_s = self.s[i] + ld
        j = int(np.searchsorted(self.s, target_s % self.length, side="left")) % len(self.pts)
        tx, ty = self.pts[j]
        dx, dy = tx - pose.x, ty - pose.y
        c, s = math.cos(pose.theta), math.sin(pose.theta)
        lx, ly = c * dx + s * dy, -s * dx + c * dy
        dist2 = max(lx * lx + ly * ly, 1e-6)
        steer = math.atan(self.car.wheelbase * 2.0 * ly / dist2)
        v_ref = p.speed_scale * self.speed[(i + 2) % len(self.pts)]
        accel = p.speed_gain * (v_ref - v)
        return accel, steer

    def heading_at(self, i: int) -> float:
        a, b = self.pts[i], self.pts[(i + 1) % len(self.pts)]
        return wrap_angle(math.atan2(b[1] - a[1], b[0] - a[0]))
