"""Matplotlib figures written next to the experiment and benchmark reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}


def _save(fig, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_condition_summary(conditions: dict, path: Path) -> Path:
    """Bar charts of lap time, lateral error and scan alignment per condition."""
    names = [n for n, c in conditions.items() if c.get("summary")]
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, 3, figsize=(9.0, 2.8))
        x = np.arange(len(names))
        panels = [("lap_time", "Lap time [s]", 1.0), ("lateral_error_m", "Lateral error [cm]", 100.0)]
        for ax, (key, label, scale) in zip(axes[:2], panels):
            mu = [scale * conditions[n]["summary"][key]["mean"] for n in names]
            sd = [scale * conditions[n]["summary"][key]["std"] for n in names]
            ax.bar(x, mu, yerr=sd, color="0.6", edgecolor="k", capsize=3)
            ax.set_ylabel(label)
        al = [conditions[n]["summary"]["alignment_pct"]["mean"] for n in names]
        axes[2].bar(x, al, color="0.6", edgecolor="k")
        axes[2].set_ylabel("Scan alignment [%]")
        axes[2].set_ylim(min(al + [100.0]) - 5, 100.5)
        for ax in axes:
            ax.set_xticks(x)
            ax.set_xticklabels(names, rotation=30, ha="right")
        fig.tight_layout()
        return _save(fig, path)


def plot_lap_traces(traces: dict, path: Path) -> Path:
    """Lateral error and position error over time for one lap per condition."""
    with plt.rc_context(_RC):
        fig, (a1, a2) = plt.subplots(2, 1, figsize=(6.5, 4.2), sharex=True)
        for name, r in traces.items():
            a1.plot(r.stamps, 100 * r.lateral_errors, lw=0.8, label=name)
            if r.position_errors.size:
                a2.plot(r.stamps, 100 * r.position_errors, lw=0.8, label=name)
        a1.set_ylabel("Lateral error [cm]")
        a2.set_ylabel("Position error [cm]")
        a2.set_xlabel("Time [s]")
        a1.legend(loc="upper right", ncol=2, frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def plot_latency(rows: list[dict], path: Path) -> Path:
    """Sensor-update p50 against particle count, one line per (backend, K)."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.5, 3.0))
        groups = {}
        for r in rows:
            groups.setdefault((r["backend"], r["k"]), []).append(r)
        for (backend, k), rs in sorted(groups.items()):
            rs = sorted(rs, key=lambda r: r["n"])
            ax.plot([r["n"] for r in rs], [r["sensor_update_ms"]["p50"] for r in rs], "o-",
                    ms=3, label=f"{backend}, K={k}")
        ax.axhline(rows[0]["reference_scan_match_ms"], color="k", ls=":", lw=0.8,
                   label="reported 1.25 ms")
        ax.set_xlabel("Particles")
        ax.set_ylabel("Sensor update p50 [ms]")
        ax.set_yscale("log")
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)
