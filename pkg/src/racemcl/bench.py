"""Per-step latency benchmark of the filter on replayed scans."""

from __future__ import annotations

import math
import os
import platform
import time

import numpy as np

from . import rng as rngs
from .motion import OdometryDelta, decompose_odometry
from .particle_filter import FilterContext, init_pose, step, update
from .sensor import ScanlineLayout, SensorModel

REFERENCE_SCAN_MATCH_MS = 1.25


def host_descriptor() -> dict:
    return {"machine": platform.machine(), "processor": platform.processor() or "unknown",
            "cpus": os.cpu_count(), "python": platform.python_version(),
            "system": platform.system()}


def _percentiles(v) -> dict:
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        return {"p50": math.nan, "p99": math.nan}
    return {"p50": float(np.percentile(v, 50)), "p99": float(np.percentile(v, 99))}


def empty_layout() -> ScanlineLayout:
    return ScanlineLayout(np.empty(0, dtype=np.int64), np.empty(0))


def bench_step_latency(ctx: FilterContext, frames, n: int = 3000, steps: int = 10_000,
                       seed: int = 0, sensor_only: bool = False) -> dict:
    """Run `steps` filter cycles over `frames` (SimFrame list, cycled) and time them.

    Reports p50/p99 (ms) of the sensor update phase and of the full step.
    """
    if not frames:
        raise ValueError("benchmark needs at least one frame")
    ps = init_pose(frames[0].ground_truth, (0.1, 0.1, 0.05), n, rngs.stream(seed, rngs.BENCH))
    upd, total = [], []
    nf = len(frames)
    for m in range(steps):
        prev, cur = frames[(m - 1) % nf], frames[m % nf]
        if sensor_only:
            t0 = time.perf_counter()
            update(ps, cur.scan, ctx.sensor)
            upd.append(1e3 * (time.perf_counter() - t0))
            continue
        if m % nf == 0:
            ps = init_pose(cur.ground_truth, (0.1, 0.1, 0.05), n, rngs.stream(seed, rngs.BENCH, m))
            d = OdometryDelta(0.0, 0.0, 0.0, cur.v, 0.025)
        else:
            d = decompose_odometry(prev.odom_pose, cur.odom_pose, cur.v, 0.025)
        ps, _, timing = step(ps, d, cur.scan, ctx, rngs.stream(seed, rngs.BENCH, nf + m))
        upd.append(1e3 * timing.update)
        total.append(1e3 * timing.total)
    sensor: SensorModel = ctx.sensor
    lut = sensor.lut
    return {
        "backend": sensor.backend,
        "n": n,
        "k": sensor.layout.k,
        "ntheta": lut.ntheta if lut is not None else None,
        "steps": steps,
        "sensor_update_ms": _percentiles(upd),
        "step_ms": _percentiles(total),
        "reference_scan_match_ms": REFERENCE_SCAN_MATCH_MS,
        "host": host_descriptor(),
    }
