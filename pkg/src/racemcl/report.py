"""Experiment outputs: per-step CSVs, per-lap detail, JSON summary, comparison table."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .metrics import LapResult


def write_lap_csv(path: Path, r: LapResult):
    path.parent.mkdir(parents=True, exist_ok=True)
    n = len(r.stamps)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["stamp", "lateral_error", "lateral_error_true", "position_error", "alignment",
                    "update_ms", "step_ms"])
        for i in range(n):
            t = r.timings[i] if i < len(r.timings) else {}
            w.writerow([f"{r.stamps[i]:.4f}", f"{r.lateral_errors[i]:.6f}",
                        f"{r.lateral_errors_true[i]:.6f}", f"{r.position_errors[i]:.6f}",
                        f"{r.alignment[i]:.3f}", f"{t.get('update', math.nan):.4f}",
                        f"{t.get('total', math.nan):.4f}"])


def lap_rows(condition: str, results: list[LapResult], seeds: list[int]) -> list[dict]:
    rows = []
    for i, (r, seed) in enumerate(zip(results, seeds)):
        rows.append({
            "condition": condition, "lap": i, "seed": seed, "dnf": int(r.dnf),
            "dnf_reason": r.dnf_reason,
            "lap_time": r.lap_time,
            "lateral_error_mean": float(np.mean(r.lateral_errors)) if r.lateral_errors.size else math.nan,
            "lateral_error_true_mean": float(np.mean(r.lateral_errors_true)) if r.lateral_errors_true.size else math.nan,
            "alignment_mean": float(np.nanmean(r.alignment)) if np.isfinite(r.alignment).any() else math.nan,
            "position_rmse": r.rmse(),
            "dead_reckoning_error": r.dead_reckoning_error,
        })
    return rows


def write_rows(path: Path, rows: list[dict]):
    if not rows:
        return
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0]))
        w.writeheader()
        for row in rows:
            w.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in row.items()})


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def write_json(path: Path, obj):
    with open(path, "w") as f:
        json.dump(_clean(obj), f, indent=2, sort_keys=True)
        f.write("\n")


def render_table(conditions: dict) -> str:
    """Condition comparison laid out like a lap-time / error / alignment results table."""
    head = (f"{'Condition':<22}{'Model':<11}{'Odom':<6}{'Lap mu [s]':>11}{'Lap sd':>9}"
            f"{'Err mu [cm]':>13}{'Err sd':>9}{'Align [%]':>11}{'DNF':>5}")
    lines = ["std: population (divide by n)", head, "-" * len(head)]
    for name, c in conditions.items():
        s = c.get("summary")
        if s is None:
            lines.append(f"{name:<22}{c['model']:<11}{c['slip'].upper():<6}{'all laps DNF':>40}")
            continue
        lines.append(
            f"{name:<22}{c['model']:<11}{c['slip'].upper():<6}"
            f"{s['lap_time']['mean']:>11.3f}{s['lap_time']['std']:>9.3f}"
            f"{100 * s['lateral_error_m']['mean']:>13.3f}{100 * s['lateral_error_m']['std']:>9.3f}"
            f"{s['alignment_pct']['mean']:>11.3f}{s['dnf']:>5d}")
    return "\n".join(lines) + "\n"


def render_bench(rows: list[dict]) -> str:
    head = f"{'backend':<8}{'N':>7}{'K':>5}{'update p50':>12}{'update p99':>12}{'step p50':>10}{'step p99':>10}"
    lines = ["latency in ms", head, "-" * len(head)]
    for r in rows:
        u, s = r["sensor_update_ms"], r["step_ms"]
        lines.append(f"{r['backend']:<8}{r['n']:>7}{r['k']:>5}{u['p50']:>12.3f}{u['p99']:>12.3f}"
                     f"{s['p50']:>10.3f}{s['p99']:>10.3f}")
    return "\n".join(lines) + "\n"
