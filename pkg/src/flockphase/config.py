"""Run configuration: one nested key/value file, fully materialized defaults,
and content hashing for provenance.

A config carries the complete parameter bundle (model, flight, arena, goal,
init, output) plus exactly one of ``scenario`` or ``sweep``. Loading merges
the file over the defaults, validates every key, and returns the
materialized dict; the echoed copy written next to outputs reproduces the
run exactly.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict
from pathlib import Path

import yaml

from .params import ArenaSpec, FlightParams, InitSpec, ModelParams, NavGoal, ParameterError
from .scenarios import (
    GainSchedule,
    IntruderPolicy,
    ScenarioSpec,
    make_baseline,
    make_intruder,
    make_switching,
)
from .sweep import SweepSpec


class ConfigError(ValueError):
    """A configuration problem, tagged with the offending key path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


_POLICY_DEFAULTS = {
    "speed": 2.5,
    "altitude": 10.0,
    "lock_distance": 5.0,
    "pause_duration": 15.0,
    "approach_start_distance": 25.0,
}

_SCENARIO_DEFAULTS = {
    "kind": "baseline",
    "n_drones": 10,
    "seed": 0,
    "baseline": {
        "gamma_att": 0.5,
        "ali_start": 0.025,
        "ali_stop": 0.4,
        "ali_step": 0.025,
        "dwell": 60.0,
    },
    "switching": {
        "low": 0.075,
        "high": 0.4,
        "dwell": 60.0,
        "cycles": 5,
        "gamma_att": 0.5,
    },
    "intruder": {
        "gamma_att": 0.5,
        "ali_start": 0.225,
        "ali_stop": 0.225,
        "ali_step": 0.025,
        "dwell": 300.0,
        "policy": dict(_POLICY_DEFAULTS),
    },
}

_SWEEP_DEFAULTS = {
    "ali": {"start": 0.0, "stop": 0.4, "step": 0.025},
    "att": {"start": 0.2, "stop": 0.8, "step": 0.05},
    "n_drones": 10,
    "runs_per_cell": 10,
    "run_duration": 300.0,
    "base_seed": 0,
    "workers": 1,
    "intruder": False,
    "policy": dict(_POLICY_DEFAULTS),
}


def default_config() -> dict:
    """The fully materialized defaults (scenario mode, baseline kind)."""
    return {
        "model": asdict(ModelParams()),
        "flight": asdict(FlightParams()),
        "arena": {
            "center": [0.0, 0.0],
            "radius": 25.0,
            "z_min": 5.0,
            "z_max": 15.0,
            "wall_gain": 5.5,
            "wall_range": 10.0,
        },
        "goal": {"z_alt": 10.0, "heading_goal": None},
        "init": asdict(InitSpec()),
        "output": {"log_rate": 1.0, "transient_cut": 10.0},
    }


def _merge(base: dict, override: dict, path: str) -> dict:
    out = dict(base)
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(here, "unknown key")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(here, "expected a mapping")
            out[key] = _merge(base[key], value, here)
        else:
            out[key] = value
    return out


def materialize(user: dict) -> dict:
    """Merge a user config over the defaults and validate its structure."""
    if not isinstance(user, dict):
        raise ConfigError("", "config must be a mapping")
    user = dict(user)
    scenario = user.pop("scenario", None)
    sweep = user.pop("sweep", None)
    if (scenario is None) == (sweep is None):
        raise ConfigError("", "config must contain exactly one of 'scenario' or 'sweep'")
    cfg = _merge(default_config(), user, "")
    if scenario is not None:
        cfg["scenario"] = _merge(_SCENARIO_DEFAULTS, scenario, "scenario")
    else:
        sweep = dict(sweep)
        # explicit value lists replace the start/stop/step blocks
        for axis in ("ali", "att"):
            block = sweep.get(axis)
            if isinstance(block, dict) and "values" in block:
                rest = {k: v for k, v in block.items() if k != "values"}
                sweep[axis] = _merge(_SWEEP_DEFAULTS[axis], rest, f"sweep.{axis}")
                sweep[axis]["values"] = [float(v) for v in block["values"]]
        merged = _merge(
            {**_SWEEP_DEFAULTS, "ali": sweep.get("ali", _SWEEP_DEFAULTS["ali"]),
             "att": sweep.get("att", _SWEEP_DEFAULTS["att"])},
            sweep,
            "sweep",
        )
        cfg["sweep"] = merged
    return cfg


def load_config(path) -> dict:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError("", f"invalid YAML: {exc}") from exc
    if raw is None:
        raw = {}
    return materialize(raw)


def apply_overrides(cfg: dict, overrides: list[str]) -> dict:
    """Apply ``key.path=value`` overrides (values parsed as YAML scalars)."""
    out = yaml.safe_load(yaml.safe_dump(cfg))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(item, "override must look like key.path=value")
        key, _, value = item.partition("=")
        parts = key.strip().split(".")
        node = out
        for part in parts[:-1]:
            if not isinstance(node, dict) or part not in node:
                raise ConfigError(key, "unknown key")
            node = node[part]
        leaf = parts[-1]
        if not isinstance(node, dict) or leaf not in node:
            raise ConfigError(key, "unknown key")
        node[leaf] = yaml.safe_load(value)
    return out


def dump_config(cfg: dict, path) -> None:
    Path(path).write_text(canonical_yaml(cfg))


def canonical_yaml(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=True, default_flow_style=False)


def config_hash(cfg: dict) -> str:
    """Stable 12-hex-digit digest of the materialized config."""
    return hashlib.sha256(canonical_yaml(cfg).encode()).hexdigest()[:12]


def _build(section: dict, cls, path: str):
    try:
        return cls(**section)
    except (ParameterError, TypeError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from exc


def build_model(cfg: dict) -> ModelParams:
    return _build(cfg["model"], ModelParams, "model")


def build_flight(cfg: dict) -> FlightParams:
    return _build(cfg["flight"], FlightParams, "flight")


def build_arena(cfg: dict) -> ArenaSpec:
    section = dict(cfg["arena"])
    section["center"] = tuple(section["center"])
    return _build(section, ArenaSpec, "arena")


def build_goal(cfg: dict) -> NavGoal:
    goal = _build(cfg["goal"], NavGoal, "goal")
    arena = cfg["arena"]
    if not arena["z_min"] <= goal.z_alt <= arena["z_max"]:
        raise ConfigError("goal.z_alt", "target altitude outside the arena band")
    return goal


def build_init(cfg: dict) -> InitSpec:
    return _build(cfg["init"], InitSpec, "init")


def build_scenario(cfg: dict) -> ScenarioSpec:
    section = cfg["scenario"]
    kind = section["kind"]
    n = section["n_drones"]
    seed = section["seed"]
    try:
        if kind == "baseline":
            b = section["baseline"]
            return make_baseline(
                n, b["gamma_att"], (b["ali_start"], b["ali_stop"]), b["ali_step"],
                b["dwell"], seed=seed,
            )
        if kind == "switching":
            s = section["switching"]
            return make_switching(
                n, s["low"], s["high"], s["dwell"], s["cycles"],
                gamma_att=s["gamma_att"], seed=seed,
            )
        if kind == "intruder":
            i = section["intruder"]
            policy = _build(i["policy"], IntruderPolicy, "scenario.intruder.policy")
            values = _gain_values(i["ali_start"], i["ali_stop"], i["ali_step"])
            schedule = GainSchedule([(i["dwell"], v, i["gamma_att"]) for v in values])
            return make_intruder(n, schedule, policy, seed=seed)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"scenario.{kind}", str(exc)) from exc
    raise ConfigError("scenario.kind", f"unknown kind {kind!r}")


def _gain_values(start: float, stop: float, step: float) -> list[float]:
    if stop < start:
        raise ValueError("empty gain range")
    if step <= 0:
        raise ValueError("step must be positive")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]


def build_sweep(cfg: dict) -> tuple[SweepSpec, IntruderPolicy | None]:
    section = cfg["sweep"]

    def axis_values(name: str) -> list[float]:
        block = section[name]
        if "values" in block:
            return [float(v) for v in block["values"]]
        return _gain_values(block["start"], block["stop"], block["step"])

    try:
        spec = SweepSpec(
            ali_values=axis_values("ali"),
            att_values=axis_values("att"),
            n_drones=section["n_drones"],
            runs_per_cell=section["runs_per_cell"],
            run_duration=section["run_duration"],
            base_seed=section["base_seed"],
            workers=section["workers"],
        )
    except ValueError as exc:
        raise ConfigError("sweep", str(exc)) from exc
    policy = None
    if section["intruder"]:
        policy = _build(section["policy"], IntruderPolicy, "sweep.policy")
    return spec, policy
