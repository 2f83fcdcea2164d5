"""Odometry motion models for particle propagation.

Three models share one interface:

* ``naive``     exact odometry advance plus fixed-variance Gaussian jitter on x, y, theta
* ``diffdrive`` rotate-translate-rotate sampling with motion-proportional variances
* ``tum``       diff-drive, but above ``lam_thresh`` of translation each rotation-noise
                std is capped by what Ackermann steering allows over that distance

All samplers draw a ``(3, N)`` block of standard normals in the same order, so
two models run on the same seed see the same underlying noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose2D, wrap_angle

MODELS = ("naive", "diffdrive", "tum")


@dataclass(frozen=True)
class OdometryDelta:
    rot1: float
    trans: float
    rot2: float
    v: float = 0.0
    dt: float = 0.025

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.trans < 0:
            raise ValueError(f"trans must be non-negative, got {self.trans}")


@dataclass(frozen=True)
class MotionParams:
    alpha1: float = 0.5     # rotation -> rotation variance
    alpha2: float = 0.015   # translation -> rotation variance
    alpha3: float = 0.1     # translation -> translation variance
    alpha4: float = 1.0     # rotation -> translation variance
    lam_thresh: float = 0.1
    fixed_sigma_xy: float = 0.05
    fixed_sigma_theta: float = 0.05
    max_steer: float = 0.4189
    wheelbase: float = 0.324
    cap_gain: float = 0.05

    def __post_init__(self):
        if min(self.alpha1, self.alpha2, self.alpha3, self.alpha4) < 0:
            raise ValueError("motion alphas must be >= 0")
        if not self.lam_thresh > 0:
            raise ValueError("lam_thresh must be > 0")
        if not self.wheelbase > 0:
            raise ValueError("wheelbase must be > 0")
        if not 0 < self.max_steer <= math.pi / 2:
            raise ValueError("max_steer must lie in (0, pi/2]")
        if self.fixed_sigma_xy < 0 or self.fixed_sigma_theta < 0 or self.cap_gain < 0:
            raise ValueError("noise scales must be >= 0")


def decompose_odometry(prev: Pose2D, curr: Pose2D, v: float = 0.0, dt: float = 0.025) -> OdometryDelta:
    dx, dy = curr.x - prev.x, curr.y - prev.y
    trans = math.hypot(dx, dy)
    if trans < 1e-6:
        return OdometryDelta(0.0, trans, wrap_angle(curr.theta - prev.theta), v, dt)
    rot1 = wrap_angle(math.atan2(dy, dx) - prev.theta)
    rot2 = wrap_angle(curr.theta - prev.theta - rot1)
    return OdometryDelta(rot1, trans, rot2, v, dt)


def apply_delta(poses: np.ndarray, rot1, trans, rot2) -> np.ndarray:
    """Advance an (N, 3) pose array by rotate-translate-rotate increments."""
    heading = poses[:, 2] + rot1
    out = np.empty_like(poses)
    out[:, 0] = poses[:, 0] + trans * np.cos(heading)
    out[:, 1] = poses[:, 1] + trans * np.sin(heading)
    out[:, 2] = wrap_angle(heading + rot2)
    return out


def advance(p: Pose2D, d: OdometryDelta) -> Pose2D:
    """Deterministic advance by an odometry delta."""
    return Pose2D.from_array(apply_delta(p.as_array()[None, :], d.rot1, d.trans, d.rot2)[0])


def rotation_cap(trans: float, params: MotionParams) -> float:
    """Largest rotation-noise std the steering geometry allows over `trans` meters."""
    if params.max_steer >= math.pi / 2:
        return math.inf
    return params.cap_gain * trans * math.tan(params.max_steer) / params.wheelbase


def noise_stds(d: OdometryDelta, params: MotionParams, model: str = "diffdrive"):
    """Per-component noise standard deviations ``(rot1, trans, rot2)``."""
    if model not in ("diffdrive", "tum"):
        raise ValueError(f"noise_stds applies to diffdrive/tum, not {model!r}")
    r1, t, r2 = d.rot1, d.trans, d.rot2
    sd_r1 = math.sqrt(params.alpha1 * r1 * r1 + params.alpha2 * t * t)
    sd_t = math.sqrt(params.alpha3 * t * t + params.alpha4 * (r1 * r1 + r2 * r2))
    sd_r2 = math.sqrt(params.alpha1 * r2 * r2 + params.alpha2 * t * t)
    if model == "tum" and t >= params.lam_thresh:
        cap = rotation_cap(t, params)
        sd_r1, sd_r2 = min(sd_r1, cap), min(sd_r2, cap)
    return sd_r1, sd_t, sd_r2


def perturbed_deltas(d: OdometryDelta, params: MotionParams, model: str,
                     rng: np.random.Generator, n: int):
    """Noisy ``(rot1, trans, rot2)`` arrays of length n for the odometry models."""
    z = rng.standard_normal((3, n))
    sd_r1, sd_t, sd_r2 = noise_stds(d, params, model)
    return d.rot1 - sd_r1 * z[0], d.trans - sd_t * z[1], d.rot2 - sd_r2 * z[2]


def propagate(poses: np.ndarray, d: OdometryDelta, params: MotionParams, model: str,
              rng: np.random.Generator) -> np.ndarray:
    """Sample successor poses for an (N, 3) particle array."""
    n = poses.shape[0]
    if model == "naive":
        z = rng.standard_normal((3, n))
        out = apply_delta(poses, d.rot1, d.trans, d.rot2)
        out[:, 0] += params.fixed_sigma_xy * z[0]
        out[:, 1] += params.fixed_sigma_xy * z[1]
        out[:, 2] = wrap_angle(out[:, 2] + params.fixed_sigma_theta * z[2])
        return out
    if model not in MODELS:
        raise ValueError(f"unknown motion model {model!r}; expected one of {MODELS}")
    r1, t, r2 = perturbed_deltas(d, params, model, rng, n)
    return apply_delta(poses, r1, t, r2)


def _sample_one(p, d, params, model, rng):
    return Pose2D.from_array(propagate(p.as_array()[None, :], d, params, model, rng)[0])


def sample_diff_drive(p: Pose2D, d: OdometryDelta, params: MotionParams, rng) -> Pose2D:
    return _sample_one(p, d, params, "diffdrive", rng)


def sample_tum(p: Pose2D, d: OdometryDelta, params: MotionParams, rng) -> Pose2D:
    return _sample_one(p, d, params, "tum", rng)


def sample_naive(p: Pose2D, d: OdometryDelta, params: MotionParams, rng) -> Pose2D:
    return _sample_one(p, d, params, "naive", rng)
