"""Experiment configuration files: [section] key = value plain text.

Centers, widths, and region bounds are expressed as fractions of the domain
length so one file serves any grid resolution. Unknown sections or keys are
rejected, and every validation error names the offending field.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from .exceptions import ConfigurationError

_REGION_KEY = re.compile(r"region_(\d+)")

DISTRIBUTED_KINDS = ("nagumo", "burgers1d", "heat1d", "heat2d")
ALL_KINDS = DISTRIBUTED_KINDS + ("heat1d_boundary",)
MODES = ("mpc", "open-loop")

_ALLOWED_KEYS = {
    "model": {
        "kind", "a", "j", "epsilon", "sigma", "alpha", "sigma_boundary",
        "bc_value", "init_value", "init_std", "noise_modes", "noise_decay",
    },
    "actuation": {"centers", "width"},
    "cost": {"kappa", "desired_schedule", "exclude_boundary", "terminal_scale"},
    "optimizer": {
        "rho", "dt", "horizon", "t_sim", "mode", "iterations", "rollouts",
        "iterations_mpc", "rollouts_mpc", "iterations_open_loop", "rollouts_open_loop",
    },
    "trials": {"count", "seed"},
    "output": {"dir"},
}


@dataclass(frozen=True)
class RegionSpec:
    """Masked region given by fraction bounds, with an optional target value."""

    bounds: tuple
    value: float | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    kind: str
    a: float
    J: int
    epsilon: float
    sigma: float
    alpha: float | None = None
    sigma_boundary: float | None = None
    bc_value: float = 0.0
    init_value: float = 0.0
    init_std: float = 0.0
    noise_modes: int | None = None
    noise_decay: float = 0.0
    centers: tuple = ()
    width: float = 0.0
    kappa: float = 1.0
    regions: tuple = ()
    desired_schedule: tuple | None = None
    exclude_boundary: bool = False
    terminal_scale: float = 0.0
    rho: float = 1.0
    dt: float = 0.01
    horizon: float = 0.1
    t_sim: float = 1.0
    mode: str = "mpc"
    iterations_mpc: int = 1
    rollouts_mpc: int = 1
    iterations_open_loop: int = 1
    rollouts_open_loop: int = 1
    trials: int = 1
    seed: int = 0
    out_dir: str = "out"

    @property
    def iterations(self) -> int:
        return self.iterations_mpc if self.mode == "mpc" else self.iterations_open_loop

    @property
    def rollouts(self) -> int:
        return self.rollouts_mpc if self.mode == "mpc" else self.rollouts_open_loop

    @property
    def horizon_steps(self) -> int:
        return _steps_of(self.horizon, self.dt, "optimizer.horizon")

    @property
    def sim_steps(self) -> int:
        return _steps_of(self.t_sim, self.dt, "optimizer.t_sim")

    @property
    def girsanov_consistent(self) -> bool:
        return abs(self.sigma * math.sqrt(self.rho) - 1.0) <= 1e-9

    def with_overrides(self, seed=None, trials=None, mode=None, out_dir=None):
        updates = {}
        if seed is not None:
            updates["seed"] = int(seed)
        if trials is not None:
            updates["trials"] = int(trials)
        if mode is not None:
            updates["mode"] = mode
        if out_dir is not None:
            updates["out_dir"] = str(out_dir)
        cfg = replace(self, **updates)
        _validate(cfg)
        return cfg


def _steps_of(span: float, dt: float, name: str) -> int:
    steps = span / dt
    if abs(steps - round(steps)) > 1e-6:
        raise ConfigurationError(f"{name}={span} is not an integer number of dt={dt} bins")
    return int(round(steps))


def _parse_scalar(raw: str, fieldname: str, cast):
    try:
        return cast(raw)
    except ValueError as exc:
        raise ConfigurationError(f"{fieldname}: cannot parse {raw!r}") from exc


def _parse_list(raw: str, fieldname: str):
    try:
        return tuple(float(tok) for tok in raw.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigurationError(f"{fieldname}: cannot parse {raw!r}") from exc


def _parse_schedule(raw: str, fieldname: str):
    pairs = []
    for tok in raw.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if ":" not in tok:
            raise ConfigurationError(f"{fieldname}: expected t:value entries, got {tok!r}")
        t_str, v_str = tok.split(":", 1)
        pairs.append((_parse_scalar(t_str, fieldname, float),
                      _parse_scalar(v_str, fieldname, float)))
    if not pairs:
        raise ConfigurationError(f"{fieldname}: empty schedule")
    if pairs[0][0] != 0.0:
        raise ConfigurationError(f"{fieldname}: schedule must start at t=0")
    if [t for t, _ in pairs] != sorted(t for t, _ in pairs):
        raise ConfigurationError(f"{fieldname}: breakpoints must increase")
    return tuple(pairs)


def schedule_value(schedule, t: float) -> float:
    """Piecewise-constant lookup: value i holds on (t_i, t_{i+1}], and the
    first value holds on [0, t_1]."""
    value = schedule[0][1]
    for t_k, v_k in schedule[1:]:
        if t > t_k:
            value = v_k
        else:
            break
    return value


def builtin_config_dir():
    return resources.files("spdecontrol") / "configs"


def list_experiments():
    names = [p.name[:-4] for p in builtin_config_dir().iterdir() if p.name.endswith(".cfg")]
    return sorted(names)


def _resolve_path(path_or_name: str):
    p = Path(path_or_name)
    if p.exists():
        return p, p.stem
    candidate = builtin_config_dir() / f"{path_or_name}.cfg"
    if candidate.is_file():
        return candidate, str(path_or_name)
    raise ConfigurationError(
        f"config {path_or_name!r} is neither a file nor a bundled experiment "
        f"(bundled: {', '.join(list_experiments())})"
    )


def load_config(path_or_name: str) -> ExperimentConfig:
    """Parse and validate a config file or a bundled experiment name."""
    path, name = _resolve_path(path_or_name)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh, source=str(path))
    except configparser.Error as exc:
        raise ConfigurationError(f"parse error in {path}: {exc}") from exc

    for section in parser.sections():
        if section not in _ALLOWED_KEYS:
            raise ConfigurationError(f"unknown section [{section}]")
        for key in parser[section]:
            if section == "cost" and _REGION_KEY.fullmatch(key):
                continue
            if key not in _ALLOWED_KEYS[section]:
                raise ConfigurationError(f"unknown key {section}.{key}")

    def get(section, key, cast=float, default=None, required=False):
        if parser.has_option(section, key):
            raw = parser.get(section, key)
            if cast is bool:
                return raw.strip().lower() in ("1", "true", "yes", "on")
            return _parse_scalar(raw, f"{section}.{key}", cast)
        if required:
            raise ConfigurationError(f"missing required field {section}.{key}")
        return default

    if not parser.has_section("model"):
        raise ConfigurationError("missing required section [model]")
    kind = get("model", "kind", str, required=True)
    dim = 2 if kind == "heat2d" else 1

    regions = []
    if parser.has_section("cost"):
        keys = sorted(
            (int(m.group(1)), key)
            for key in parser["cost"]
            if (m := _REGION_KEY.fullmatch(key))
        )
        for _, key in keys:
            vals = _parse_list(parser.get("cost", key), f"cost.{key}")
            nb = 2 * dim
            if len(vals) == nb:
                regions.append(RegionSpec(bounds=vals))
            elif len(vals) == nb + 1:
                regions.append(RegionSpec(bounds=vals[:nb], value=vals[nb]))
            else:
                raise ConfigurationError(
                    f"cost.{key}: expected {nb} bounds plus an optional target value"
                )

    cfg = ExperimentConfig(
        name=name,
        kind=kind,
        a=get("model", "a", float, required=True),
        J=get("model", "j", int, required=True),
        epsilon=get("model", "epsilon", float, required=True),
        sigma=get("model", "sigma", float, 0.0),
        alpha=get("model", "alpha", float, None),
        sigma_boundary=get("model", "sigma_boundary", float, None),
        bc_value=get("model", "bc_value", float, 0.0),
        init_value=get("model", "init_value", float, 0.0),
        init_std=get("model", "init_std", float, 0.0),
        noise_modes=get("model", "noise_modes", int, None),
        noise_decay=get("model", "noise_decay", float, 0.0),
        centers=_parse_list(parser.get("actuation", "centers"), "actuation.centers")
        if parser.has_option("actuation", "centers") else (),
        width=get("actuation", "width", float, 0.0),
        kappa=get("cost", "kappa", float, required=True),
        regions=tuple(regions),
        desired_schedule=_parse_schedule(parser.get("cost", "desired_schedule"),
                                         "cost.desired_schedule")
        if parser.has_option("cost", "desired_schedule") else None,
        exclude_boundary=get("cost", "exclude_boundary", bool, False),
        terminal_scale=get("cost", "terminal_scale", float, 0.0),
        rho=get("optimizer", "rho", float, required=True),
        dt=get("optimizer", "dt", float, required=True),
        horizon=get("optimizer", "horizon", float, required=True),
        t_sim=get("optimizer", "t_sim", float, required=True),
        mode=get("optimizer", "mode", str, "mpc"),
        iterations_mpc=get("optimizer", "iterations_mpc", int,
                           get("optimizer", "iterations", int, None)),
        rollouts_mpc=get("optimizer", "rollouts_mpc", int,
                         get("optimizer", "rollouts", int, None)),
        iterations_open_loop=get("optimizer", "iterations_open_loop", int,
                                 get("optimizer", "iterations", int, None)),
        rollouts_open_loop=get("optimizer", "rollouts_open_loop", int,
                               get("optimizer", "rollouts", int, None)),
        trials=get("trials", "count", int, 1),
        seed=get("trials", "seed", int, 0),
        out_dir=get("output", "dir", str, "out"),
    )
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    def need(cond, msg):
        if not cond:
            raise ConfigurationError(msg)

    need(cfg.kind in ALL_KINDS, f"model.kind must be one of {ALL_KINDS}, got {cfg.kind!r}")
    need(cfg.a > 0, f"model.a must be positive, got {cfg.a}")
    need(cfg.J >= 2, f"model.j must be at least 2, got {cfg.J}")
    need(cfg.epsilon > 0, f"model.epsilon must be positive, got {cfg.epsilon}")
    need(cfg.sigma >= 0, f"model.sigma must be nonnegative, got {cfg.sigma}")
    if cfg.kind == "nagumo":
        need(cfg.alpha is not None, "model.alpha is required for the nagumo model")
    if cfg.kind == "heat1d_boundary":
        need(not cfg.centers, "actuation.centers is not used with boundary control")
    else:
        need(len(cfg.centers) >= 1, "actuation.centers is required for distributed control")
        need(cfg.width > 0, f"actuation.width must be positive, got {cfg.width}")
        dim = 2 if cfg.kind == "heat2d" else 1
        need(len(cfg.centers) % dim == 0,
             f"actuation.centers needs {dim} coordinates per actuator")
        for c in cfg.centers:
            need(0.0 <= c <= 1.0, f"actuation.centers fraction {c} outside [0, 1]")
    need(cfg.kappa > 0, f"cost.kappa must be positive, got {cfg.kappa}")
    need(len(cfg.regions) >= 1, "at least one cost.region_N entry is required")
    dim = 2 if cfg.kind == "heat2d" else 1
    for i, region in enumerate(cfg.regions, start=1):
        nb = 2 * dim
        need(len(region.bounds) == nb,
             f"cost.region_{i} needs {nb} fraction bounds for a {dim}-D model")
        for b in region.bounds:
            need(0.0 <= b <= 1.0, f"cost.region_{i} fraction {b} outside [0, 1]")
        for lo, hi in zip(region.bounds[::2], region.bounds[1::2]):
            need(lo <= hi, f"cost.region_{i} bounds out of order")
        if cfg.desired_schedule is None:
            need(region.value is not None,
                 f"cost.region_{i} needs a target value (no desired_schedule given)")
    need(cfg.rho > 0, f"optimizer.rho must be positive, got {cfg.rho}")
    need(cfg.dt > 0, f"optimizer.dt must be positive, got {cfg.dt}")
    need(cfg.horizon > 0, f"optimizer.horizon must be positive, got {cfg.horizon}")
    need(cfg.t_sim > 0, f"optimizer.t_sim must be positive, got {cfg.t_sim}")
    need(cfg.mode in MODES, f"optimizer.mode must be one of {MODES}, got {cfg.mode!r}")
    if cfg.mode == "mpc":
        need(cfg.horizon <= cfg.t_sim + 1e-12,
             "optimizer.horizon must not exceed t_sim in mpc mode")
    for label in ("iterations", "rollouts"):
        value = getattr(cfg, f"{label}_{'mpc' if cfg.mode == 'mpc' else 'open_loop'}")
        need(value is not None,
             f"optimizer.{label} (or the mode-specific variant) is required")
    need(cfg.iterations >= 0, "optimizer.iterations must be nonnegative")
    need(cfg.rollouts >= 1, "optimizer.rollouts must be at least 1")
    need(cfg.trials >= 1, f"trials.count must be at least 1, got {cfg.trials}")
    cfg.horizon_steps
    cfg.sim_steps
