"""Command line entry point: ``racemcl <subcommand>``.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 a condition finished
with every lap DNF.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import build, config, plotting, report, runner
from .grid import MapError, load_map_yaml
from .raycast import LUTError, RangeLUT, build_lut
from .sim.lap import SimLog
from .sim.track import TRACK_KINDS, generate_track, save_track

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_DNF = 0, 2, 3, 4

log = logging.getLogger("racemcl")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config value, e.g. --set filter.n=1000 (repeatable)")
    p.add_argument("--seed", type=int, help="root seed")
    p.add_argument("--out-dir", help="output directory")
    p.add_argument("--track", help="fixture name or track bundle directory")
    p.add_argument("--map", help="map metadata YAML (image resolved relative to it)")
    p.add_argument("-v", "--verbose", action="store_true")


def _lut_args(p):
    p.add_argument("--lut", help="prebuilt LUT file")
    p.add_argument("--build-lut", action="store_true", help="build the LUT in memory first")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="racemcl", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("build-lut", help="precompute the range lookup table for a map")
    _common(p)
    p.add_argument("--ntheta", type=int)
    p.add_argument("--max-range", type=float)
    p.add_argument("--max-mb", type=float, help="memory cap in MiB")
    p.add_argument("--out", required=True, help="LUT output file")

    p = sub.add_parser("gen-track", help="generate a track bundle (map + raceline)")
    p.add_argument("--kind", choices=TRACK_KINDS, required=True)
    p.add_argument("--out", required=True, help="bundle directory")
    p.add_argument("--resolution", type=float, default=0.05)
    p.add_argument("--raceline-offset", type=float, default=0.0,
                   help="lateral raceline offset from the centerline (m, + is left)")

    p = sub.add_parser("experiment", help="run the motion-model x slip condition grid")
    _common(p)
    _lut_args(p)
    p.add_argument("--laps", type=int)
    p.add_argument("--models", nargs="+")
    p.add_argument("--slips", nargs="+")
    p.add_argument("--ground-truth", action="store_true", help="feed the controller the true pose")
    p.add_argument("--save-logs", action="store_true", help="write a SimLog per lap")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("replay", help="run the filter open-loop on a recorded SimLog")
    _common(p)
    _lut_args(p)
    p.add_argument("--log", required=True, help="SimLog (JSON lines)")

    p = sub.add_parser("bench", help="per-step latency benchmark")
    _common(p)
    _lut_args(p)
    p.add_argument("--backend", action="append", choices=("lut", "exact"))
    p.add_argument("--n", type=int, nargs="+", help="particle counts")
    p.add_argument("--k", type=int, nargs="+", help="scanline counts")
    p.add_argument("--steps", type=int)
    p.add_argument("--sensor-only", action="store_true", help="time only the sensor update")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("dump-config", help="print the fully resolved configuration")
    _common(p)
    p.add_argument("--schema", action="store_true", help="print every key with default and meaning")
    return ap


def _load_cfg(args) -> config.RunConfig:
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.out_dir:
        overrides.append(f"out_dir={args.out_dir}")
    if args.track:
        overrides.append(f"map.track={args.track}")
    if args.map:
        overrides.append(f"map.map={args.map}")
    for attr, key in (("laps", "experiment.laps"), ("ntheta", "sensor.ntheta"),
                      ("max_range", "sensor.max_range"), ("steps", "bench.steps")):
        if getattr(args, attr, None) is not None:
            overrides.append(f"{key}={getattr(args, attr)}")
    if getattr(args, "lut", None):
        overrides.append(f"map.lut_path={args.lut}")
    return config.load_config(args.config, overrides)


def cmd_build_lut(args) -> int:
    cfg = _load_cfg(args)
    grid = load_map_yaml(cfg.map.map) if cfg.map.map else build.track(cfg).grid
    max_mb = args.max_mb if args.max_mb is not None else cfg.sensor.lut_max_mb
    try:
        lut = build_lut(grid, cfg.sensor.ntheta, cfg.sensor.max_range, int(max_mb * 2**20))
    except LUTError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    lut.save(out)
    print(f"built {lut.nx}x{lut.ny}x{lut.ntheta} LUT in {lut.build_seconds:.2f} s, "
          f"{lut.nbytes / 2**20:.1f} MiB -> {out}")
    return EXIT_OK


def cmd_gen_track(args) -> int:
    track = generate_track(args.kind, args.resolution, args.raceline_offset)
    out = save_track(track, args.out)
    print(f"{args.kind}: {track.grid.width}x{track.grid.height} cells, raceline {track.length:.2f} m "
          f"-> {out}")
    return EXIT_OK


def _lut(cfg, args, grid):
    if cfg.sensor.backend == "exact" and not args.build_lut and not cfg.map.lut_path:
        return None
    lut = build.lut_for(cfg, grid, build=args.build_lut)
    if args.build_lut:
        log.info("built LUT in %.2f s (%.1f MiB)", lut.build_seconds, lut.nbytes / 2**20)
    return lut


def cmd_experiment(args) -> int:
    cfg = _load_cfg(args)
    if args.models:
        cfg.experiment.models = args.models
    if args.slips:
        cfg.experiment.slips = args.slips
    config.validate(cfg)
    track = build.track(cfg)
    lut = None if args.ground_truth else _lut(cfg, args, track.grid)
    res = runner.run_conditions(cfg, track, lut, ground_truth=args.ground_truth,
                                record=args.save_logs)
    out = Path(cfg.out_dir)
    runner.write_experiment(res, cfg, out, figures=cfg.experiment.figures and not args.no_figures)
    print(report.render_table(res.conditions), end="")
    print(f"reports written to {out}")
    return EXIT_DNF if res.any_all_dnf else EXIT_OK


def cmd_replay(args) -> int:
    cfg = _load_cfg(args)
    simlog = SimLog.read(args.log)
    track = build.track(cfg)
    lut = _lut(cfg, args, track.grid)
    result = runner.replay(cfg, simlog, track, lut)
    runner.write_replay(result, Path(cfg.out_dir))
    for k, v in result["summary"].items():
        print(f"{k}: {v:.4f}" if isinstance(v, float) else f"{k}: {v}")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _load_cfg(args)
    track = build.track(cfg)
    backends = args.backend or [cfg.sensor.backend]
    lut = build.lut_for(cfg, track.grid, build=args.build_lut) if "lut" in backends else None
    rows = runner.bench_sweep(cfg, track, lut, backends, args.n, args.k, sensor_only=args.sensor_only)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report.write_json(out / "bench.json", rows)
    (out / "bench.txt").write_text(report.render_bench(rows))
    if not args.no_figures:
        plotting.plot_latency(rows, out / "figures" / "latency.png")
    print(report.render_bench(rows), end="")
    return EXIT_OK


def cmd_dump_config(args) -> int:
    if args.schema:
        print(config.schema(), end="")
        return EXIT_OK
    print(config.dump(_load_cfg(args)), end="")
    return EXIT_OK


COMMANDS = {"build-lut": cmd_build_lut, "gen-track": cmd_gen_track, "experiment": cmd_experiment,
            "replay": cmd_replay, "bench": cmd_bench, "dump-config": cmd_dump_config}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.cmd](args)
    except (config.ConfigError, build.LUTMismatch, LUTError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, MapError, OSError) as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        # malformed inputs (e.g. SimLog records) surface as I/O problems
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
