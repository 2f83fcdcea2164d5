"""Run configuration: nested dataclasses loaded from YAML with strict key checking."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml


class ConfigError(ValueError):
    pass


def _f(default, doc: str, **kw):
    if isinstance(default, (list, dict)):
        return field(default_factory=lambda d=default: __import__("copy").deepcopy(d),
                     metadata={"doc": doc}, **kw)
    return field(default=default, metadata={"doc": doc}, **kw)


@dataclass
class MapConfig:
    track: str = _f("oval", "fixture track name (oval, hairpin) or path to a track bundle directory")
    map: str | None = _f(None, "map metadata YAML overriding the track's own map")
    lut_path: str | None = _f(None, "prebuilt range LUT file; otherwise pass --build-lut")


@dataclass
class MotionConfig:
    model: str = _f("tum", "motion model: naive, diffdrive or tum")
    alpha1: float = _f(0.5, "how much rotation affects rotation variance")
    alpha2: float = _f(0.015, "how much translation affects rotation variance")
    alpha3: float = _f(0.1, "how much translation affects translation variance")
    alpha4: float = _f(1.0, "how much rotation affects translation variance")
    lam_thresh: float = _f(0.1, "minimum translation (m) for the high-speed rotation cap to apply")
    cap_gain: float = _f(0.05, "unitless gain on the Ackermann rotation-noise cap")
    max_steer: float = _f(0.4189, "steering limit (rad) used by the rotation cap")
    wheelbase: float = _f(0.324, "wheelbase (m) used by the rotation cap")
    fixed_sigma_xy: float = _f(0.05, "naive model position noise std (m)")
    fixed_sigma_theta: float = _f(0.05, "naive model heading noise std (rad)")


@dataclass
class SensorConfig:
    layout: str = _f("boxed", "scanline layout: boxed or uniform")
    k: int = _f(60, "number of scanlines evaluated per particle")
    aspect: float = _f(0.3, "boxed layout corridor width/length ratio")
    backend: str = _f("lut", "expected-range backend: lut or exact")
    ntheta: int = _f(360, "LUT angular bins")
    max_range: float = _f(10.0, "LiDAR / LUT maximum range (m)")
    lut_max_mb: float = _f(2048.0, "refuse to build LUTs larger than this (MiB)")
    z_hit: float = _f(0.75, "beam model hit weight")
    z_short: float = _f(0.10, "beam model short-reading weight")
    z_max: float = _f(0.07, "beam model max-range weight")
    z_rand: float = _f(0.08, "beam model uniform-noise weight")
    sigma_hit: float = _f(0.10, "hit component std (m)")
    lambda_short: float = _f(0.5, "short component exponential rate (1/m)")
    squash: float = _f(1.0 / 2.2, "exponent applied to the summed beam log-likelihood")
    floor: float = _f(-80.0, "log-weight assigned to particles whose LiDAR lies off the map")
    lidar_offset: list = _f([0.27, 0.0, 0.0], "LiDAR pose in the rear-axle frame [x, y, yaw]")
    beams: int = _f(1080, "simulated scanner beam count")
    fov_deg: float = _f(270.0, "simulated scanner field of view (deg)")
    noise: float = _f(0.02, "simulated range noise std (m)")


@dataclass
class FilterConfig:
    n: int = _f(3000, "particle count")
    resample_ess_frac: float = _f(0.5, "resample when ESS < this fraction of N")
    estimate: str = _f("mean", "pose estimate: mean or max_weight")
    init_sigma: list = _f([0.1, 0.1, 0.05], "initial particle spread around the start pose [x, y, theta]")


@dataclass
class SimConfig:
    physics_hz: int = _f(400, "vehicle integration rate")
    filter_hz: int = _f(40, "scan / odometry / filter rate")
    speed_scale: float = _f(1.0, "multiplier on the raceline speed profile")
    timeout_factor: float = _f(3.0, "DNF when a lap exceeds this multiple of its nominal time")
    lookahead_min: float = _f(0.5, "pure pursuit minimum lookahead (m)")
    lookahead_gain: float = _f(0.2, "pure pursuit lookahead per m/s")
    lookahead_max: float = _f(2.2, "pure pursuit maximum lookahead (m)")
    speed_gain: float = _f(4.0, "proportional speed-loop gain (1/s)")
    max_steer_rate: float = _f(5.0, "steering slew limit (rad/s)")
    max_accel: float = _f(6.0, "acceleration limit (m/s^2)")
    max_decel: float = _f(8.0, "braking limit (m/s^2)")


@dataclass
class SlipConfig:
    trans_scale: float = _f(1.0, "reported/true distance ratio")
    trans_noise: float = _f(0.0, "relative std of reported distance")
    rot_noise: float = _f(0.0, "rotation noise std per meter (rad/m)")


def _default_slips():
    return {"hq": SlipConfig(1.0, 0.01, 0.005), "lq": SlipConfig(1.3, 0.05, 0.05)}


@dataclass
class EvalConfig:
    alignment_tolerance: float | None = _f(None, "scan alignment tolerance (m); default 2x map resolution")
    alignment_stride: int = _f(10, "score every n-th beam")
    rmse_skip_s: float = _f(1.0, "seconds excluded from RMSE while the filter converges")


@dataclass
class ExperimentConfig:
    models: list = _f(["diffdrive", "tum"], "motion models in the condition grid")
    slips: list = _f(["hq", "lq"], "slip profiles in the condition grid")
    laps: int = _f(10, "laps per condition")
    figures: bool = _f(True, "render PNG figures next to the CSV/JSON reports")


@dataclass
class BenchConfig:
    steps: int = _f(10000, "filter steps per benchmark point")
    n: list = _f([3000], "particle counts to sweep")
    k: list = _f([60], "scanline counts to sweep")


@dataclass
class RunConfig:
    seed: int = _f(0, "root seed; every random stream derives from it")
    out_dir: str = _f("runs", "output directory")
    map: MapConfig = _f(None, "map and LUT inputs", init=True)
    motion: MotionConfig = _f(None, "motion model")
    sensor: SensorConfig = _f(None, "sensor model and scanner")
    filter: FilterConfig = _f(None, "particle filter")
    sim: SimConfig = _f(None, "simulator and controller")
    slip: dict = _f(None, "named odometry slip profiles")
    eval: EvalConfig = _f(None, "metrics")
    experiment: ExperimentConfig = _f(None, "experiment grid")
    bench: BenchConfig = _f(None, "latency benchmark")

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) is None and f.name in _SECTIONS:
                setattr(self, f.name, _SECTIONS[f.name]())


_SECTIONS = {"map": MapConfig, "motion": MotionConfig, "sensor": SensorConfig,
             "filter": FilterConfig, "sim": SimConfig, "slip": _default_slips,
             "eval": EvalConfig, "experiment": ExperimentConfig, "bench": BenchConfig}


def _coerce(value, default, name):
    if default is None or value is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{name}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{name}: expected a string, got {value!r}")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{name}: expected a list, got {value!r}")
        return value
    return value


def _merge_section(obj, data: dict, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix}: expected a mapping")
    known = {f.name for f in fields(obj)}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown config key '{prefix}{key}'")
        setattr(obj, key, _coerce(value, getattr(obj, key), prefix + key))


def merge(cfg: RunConfig, data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config document must be a mapping")
    top = {f.name for f in fields(cfg)}
    for key, value in data.items():
        if key not in top:
            raise ConfigError(f"unknown config key '{key}'")
        if key == "slip":
            if not isinstance(value, dict):
                raise ConfigError("slip: expected a mapping of profile name -> settings")
            for name, prof in value.items():
                target = cfg.slip.setdefault(name, SlipConfig())
                _merge_section(target, prof or {}, f"slip.{name}.")
        elif dataclasses.is_dataclass(getattr(cfg, key)):
            _merge_section(getattr(cfg, key), value or {}, key + ".")
        else:
            setattr(cfg, key, _coerce(value, getattr(cfg, key), key))
    return cfg


def load_config(path=None, overrides: list[str] | None = None) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise FileNotFoundError(f"config file not found: {p}")
        with open(p) as f:
            try:
                data = yaml.safe_load(f) or {}
            except yaml.YAMLError as e:
                raise ConfigError(f"{p}: {e}") from e
        merge(cfg, data)
    for item in overrides or []:
        apply_override(cfg, item)
    validate(cfg)
    return cfg


def apply_override(cfg: RunConfig, item: str):
    """Apply a ``dotted.key=value`` override; the value is parsed as YAML."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, raw = item.split("=", 1)
    value = yaml.safe_load(raw)
    node: dict = value
    for part in reversed(key.strip().split(".")):
        node = {part: node}
    merge(cfg, node)


def validate(cfg: RunConfig):
    """Construct every runtime object once so bad values fail before any work starts."""
    from . import build
    try:
        build.motion_params(cfg)
        build.beam_params(cfg)
        build.scan_meta(cfg)
        build.sim_settings(cfg)
        for name in cfg.slip:
            build.slip_profile(cfg, name)
    except (ValueError, TypeError) as e:
        raise ConfigError(str(e)) from e
    if cfg.motion.model not in ("naive", "diffdrive", "tum"):
        raise ConfigError(f"motion.model must be naive, diffdrive or tum, got {cfg.motion.model!r}")
    if cfg.sensor.layout not in ("boxed", "uniform"):
        raise ConfigError(f"sensor.layout must be boxed or uniform, got {cfg.sensor.layout!r}")
    if cfg.sensor.backend not in ("lut", "exact"):
        raise ConfigError(f"sensor.backend must be lut or exact, got {cfg.sensor.backend!r}")
    if cfg.filter.estimate not in ("mean", "max_weight"):
        raise ConfigError("filter.estimate must be mean or max_weight")
    if cfg.filter.n < 1 or not 0 < cfg.filter.resample_ess_frac <= 1:
        raise ConfigError("filter.n must be >= 1 and resample_ess_frac in (0, 1]")
    if cfg.sensor.ntheta < 1 or cfg.sensor.k < 1:
        raise ConfigError("sensor.ntheta and sensor.k must be >= 1")
    if len(cfg.sensor.lidar_offset) != 3 or len(cfg.filter.init_sigma) != 3:
        raise ConfigError("lidar_offset and init_sigma take three values")
    if cfg.experiment.laps < 1:
        raise ConfigError("experiment.laps must be >= 1")
    for m in cfg.experiment.models:
        if m not in ("naive", "diffdrive", "tum"):
            raise ConfigError(f"experiment.models: unknown model {m!r}")
    for s in cfg.experiment.slips:
        if s not in cfg.slip:
            raise ConfigError(f"experiment.slips: no slip profile named {s!r}")
    if cfg.eval.alignment_stride < 1:
        raise ConfigError("eval.alignment_stride must be >= 1")


def to_dict(cfg: RunConfig) -> dict:
    return dataclasses.asdict(cfg)


def dump(cfg: RunConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)


def schema() -> str:
    """Every key with its default and meaning, as commented YAML."""
    lines = []
    cfg = RunConfig()

    def emit(obj, indent):
        for f in fields(obj):
            value = getattr(obj, f.name)
            doc = f.metadata.get("doc", "")
            pad = "  " * indent
            if dataclasses.is_dataclass(value):
                lines.append(f"{pad}{f.name}:  # {doc}")
                emit(value, indent + 1)
            elif isinstance(value, dict):
                lines.append(f"{pad}{f.name}:  # {doc}")
                for name, sub in value.items():
                    lines.append(f"{pad}  {name}:")
                    emit(sub, indent + 2)
            else:
                rendered = yaml.safe_dump(value, default_flow_style=True).strip()
                rendered = rendered.removesuffix("\n...").removesuffix("...").strip()
                lines.append(f"{pad}{f.name}: {rendered}  # {doc}")

    emit(cfg, 0)
    return "\n".join(lines) + "\n"
