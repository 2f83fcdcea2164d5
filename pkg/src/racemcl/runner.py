"""Experiment, replay and benchmark pipelines shared by the CLI and the acceptance suite."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import build, plotting, report
from . import rng as rngs
from .bench import bench_step_latency, empty_layout
from .metrics import AlignmentScorer, LapResult, aggregate_laps, lateral_error
from .motion import decompose_odometry
from .particle_filter import ParticleFilter, init_pose
from .raycast import RangeLUT
from .sim.lap import SimLog, drive_lap

log = logging.getLogger(__name__)


def lap_seed(root: int, lap: int) -> int:
    """Per-lap seed, shared by every condition so conditions are paired."""
    return int(np.random.SeedSequence(int(root), spawn_key=(100, lap)).generate_state(1)[0])


@dataclass
class ExperimentResult:
    conditions: dict = field(default_factory=dict)
    laps: dict = field(default_factory=dict)      # condition -> list[LapResult]
    logs: dict = field(default_factory=dict)      # condition -> list[SimLog]

    @property
    def any_all_dnf(self) -> bool:
        return any(c.get("summary") is None for c in self.conditions.values())


def run_conditions(cfg, track, lut: RangeLUT | None, ground_truth: bool = False,
                   record: bool = False, models=None, slips=None, laps=None) -> ExperimentResult:
    models = list(models or cfg.experiment.models)
    slips = list(slips or cfg.experiment.slips)
    laps = int(laps or cfg.experiment.laps)
    settings = build.sim_settings(cfg)
    seeds = [lap_seed(cfg.seed, i) for i in range(laps)]
    out = ExperimentResult()
    grid_models = ["ground_truth"] if ground_truth else models
    sensor = None if ground_truth else build.sensor_model(cfg, track.grid, lut)
    for model in grid_models:
        for slip_name in slips:
            name = f"{model}_{slip_name}"
            slip = build.slip_profile(cfg, slip_name)
            setup = None
            if not ground_truth:
                setup = build.filter_setup(cfg, build.filter_context(cfg, sensor, model))
            results, logs = [], []
            for seed in seeds:
                r, simlog = drive_lap(track, settings, slip, setup, seed, record)
                results.append(r)
                logs.append(simlog)
                log.info("%s seed=%d lap=%.3f dnf=%s", name, seed, r.lap_time, r.dnf_reason or "-")
            try:
                summary = aggregate_laps(results)
            except ValueError:
                summary = None
            out.conditions[name] = {"model": model, "slip": slip_name, "seeds": seeds,
                                    "summary": summary}
            out.laps[name] = results
            if record:
                out.logs[name] = logs
    return out


def _deterministic_summary(summary):
    if summary is None:
        return None
    return {k: v for k, v in summary.items() if k != "latency_ms"}


def write_experiment(res: ExperimentResult, cfg, out_dir: Path, figures: bool = True) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for name, results in res.laps.items():
        seeds = res.conditions[name]["seeds"]
        for i, r in enumerate(results):
            report.write_lap_csv(out_dir / name / f"{i}.csv", _strip_timing(r))
        rows.extend(report.lap_rows(name, results, seeds))
        for i, simlog in enumerate(res.logs.get(name, [])):
            if simlog is not None:
                simlog.write(out_dir / name / f"{i}.simlog.jsonl")
    report.write_rows(out_dir / "laps.csv", rows)
    summary = {
        "seed": cfg.seed,
        "track": cfg.map.track,
        "std_convention": "population (divide by n)",
        "conditions": {n: {**{k: v for k, v in c.items() if k != "summary"},
                           "summary": _deterministic_summary(c["summary"])}
                       for n, c in res.conditions.items()},
    }
    report.write_json(out_dir / "summary.json", summary)
    report.write_json(out_dir / "timing.json",
                      {n: (c["summary"] or {}).get("latency_ms") for n, c in res.conditions.items()})
    table = report.render_table(res.conditions)
    (out_dir / "table.txt").write_text(table)
    if figures and any(c.get("summary") for c in res.conditions.values()):
        plotting.plot_condition_summary(res.conditions, out_dir / "figures" / "conditions.png")
        traces = {n: rs[0] for n, rs in res.laps.items() if rs and not rs[0].dnf}
        if traces:
            plotting.plot_lap_traces(traces, out_dir / "figures" / "lap0_errors.png")
    return summary


def _strip_timing(r: LapResult) -> LapResult:
    # per-step CSVs stay byte-identical across runs; latency goes to timing.json
    return LapResult(r.lap_time, r.lateral_errors, r.alignment, [], r.dnf, r.lateral_errors_true,
                     r.position_errors, r.stamps, r.dead_reckoning_error, r.dnf_reason)


def replay(cfg, simlog: SimLog, track, lut: RangeLUT | None, seed: int | None = None) -> dict:
    """Run the filter open-loop over a recorded log."""
    seed = cfg.seed if seed is None else seed
    sensor = build.sensor_model(cfg, track.grid, lut)
    sensor.lidar_offset = simlog.lidar_offset
    ctx = build.filter_context(cfg, sensor)
    first = simlog.frames[0]
    ps = init_pose(first.ground_truth, tuple(cfg.filter.init_sigma), cfg.filter.n,
                   rngs.stream(seed, rngs.FILTER_INIT), track.grid)
    pf = ParticleFilter(ctx, ps, seed)
    scorer = AlignmentScorer(track.grid, build.alignment_params(cfg), simlog.lidar_offset)
    rows, timings = [], []
    for prev, cur in zip(simlog.frames[:-1], simlog.frames[1:]):
        d = decompose_odometry(prev.odom_pose, cur.odom_pose, cur.v, simlog.dt)
        est, timing = pf.step(d, cur.scan)
        m = est.mean
        rows.append({"stamp": cur.stamp, "x": m.x, "y": m.y, "theta": m.theta,
                     "gt_x": cur.ground_truth.x, "gt_y": cur.ground_truth.y,
                     "gt_theta": cur.ground_truth.theta,
                     "position_error": m.distance(cur.ground_truth),
                     "lateral_error": lateral_error(m, track.raceline),
                     "alignment": scorer.score(m, cur.scan),
                     "cov_trace": float(np.trace(est.covariance))})
        timings.append(timing.as_ms())
    err = np.array([r["position_error"] for r in rows])
    stamps = np.array([r["stamp"] for r in rows])
    settled = err[stamps >= stamps[0] + cfg.eval.rmse_skip_s] if rows else err
    summary = {
        "frames": len(simlog.frames),
        "alignment_pct": float(np.nanmean([r["alignment"] for r in rows])) if rows else math.nan,
        "lateral_error_m": float(np.mean([r["lateral_error"] for r in rows])) if rows else math.nan,
        "position_rmse_m": float(np.sqrt(np.mean(settled ** 2))) if settled.size else math.nan,
        "dead_reckoning_error_m": simlog.frames[-1].odom_pose.distance(simlog.frames[-1].ground_truth),
    }
    return {"rows": rows, "summary": summary, "timings": timings}


def write_replay(result: dict, out_dir: Path):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = result["rows"]
    with open(out_dir / "estimates.csv", "w", newline="") as f:
        if rows:
            w = csv.DictWriter(f, fieldnames=list(rows[0]))
            w.writeheader()
            for r in rows:
                w.writerow({k: f"{v:.6f}" for k, v in r.items()})
    report.write_json(out_dir / "summary.json", result["summary"])
    t = result["timings"]
    latency = {ph: {"p50": float(np.percentile([x[ph] for x in t], 50)),
                    "p99": float(np.percentile([x[ph] for x in t], 99))} for ph in (t[0] if t else {})}
    report.write_json(out_dir / "timing.json", latency)


def bench_frames(cfg, track, seed: int = 0):
    """A recorded ground-truth lap used as the benchmark workload."""
    settings = build.sim_settings(cfg)
    _, simlog = drive_lap(track, settings, build.slip_profile(cfg, "hq") if "hq" in cfg.slip
                          else build.slip_profile(cfg, next(iter(cfg.slip))), None, seed, True)
    return simlog.frames


def bench_sweep(cfg, track, lut, backends=("lut",), ns=None, ks=None, steps=None,
                sensor_only: bool = False) -> list[dict]:
    frames = bench_frames(cfg, track, cfg.seed)
    rows = []
    for backend in backends:
        for k in (ks or cfg.bench.k):
            sensor = build.sensor_model(cfg, track.grid, lut, backend, k if k > 0 else 1)
            if k == 0:
                sensor.layout = empty_layout()
            ctx = build.filter_context(cfg, sensor)
            for n in (ns or cfg.bench.n):
                rows.append(bench_step_latency(ctx, frames, n, steps or cfg.bench.steps, cfg.seed,
                                               sensor_only))
    return rows
