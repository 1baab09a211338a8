"""Run configuration: presets, flat key-value files and validation.

Configuration keys are flat and dotted (``graph.p_edge``, ``trigger.tau0``).
Values are resolved in increasing priority: built-in defaults, the preset,
the config file, then command-line overrides. Unknown keys are rejected.

A config file is a flat YAML mapping, e.g.::

    preset: desk
    T: 500
    trigger.tau0: 8
    graph.p_edge: 0.2
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping, Optional

import yaml

from bandit_dopd.exceptions import ConfigError, ParameterError
from bandit_dopd.geometry import Ball, Box, FeasibleSet
from bandit_dopd.network import GRAPH_KINDS, GraphProcess
from bandit_dopd.problem import RegressionFamily
from bandit_dopd.schedules import Geometric, NoTrigger, Power, ScaledPower, Schedule, Theorem1, Theorem2

SCHEDULE_FAMILIES = ("theorem1", "theorem2", "paper-sec4")
TRIGGER_KINDS = ("power", "geometric", "scaled_power", "none")
REQUIRED = ("n", "p", "T", "q", "m")


@dataclass(frozen=True)
class RunConfig:
    n: int
    p: int
    T: int
    q: int
    m: int
    seed: int = 0
    mode: str = "bandit"
    init: str = "zero"
    problem_family: str = "regression"
    set_kind: str = "box"
    set_size: float = 5.0
    schedule_family: str = "paper-sec4"
    schedule_kappa: float = 0.5
    schedule_alpha0: float = 1.0
    schedule_theta1: float = 0.5
    schedule_theta2: float = 0.5
    trigger_kind: Optional[str] = None  # None picks the schedule family's own trigger
    trigger_theta: float = 1.0
    trigger_c: float = 1.5
    trigger_tau0: float = 4.0
    trigger_theta3: float = 1.0
    graph_kind: str = "paper4quarters"
    graph_p_edge: float = 0.1
    graph_b_window: int = 4
    compute_static_comparator: bool = False
    compute_dynamic_comparator: bool = False
    debug_invariants: bool = False
    out: str = "runs/latest"

    def __post_init__(self):
        for key in REQUIRED:
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be >= 1, got {getattr(self, key)!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if self.mode not in ("bandit", "full_info"):
            raise ConfigError(f"mode must be 'bandit' or 'full-info', got {self.mode!r}")
        if self.init not in ("zero", "uniform"):
            raise ConfigError(f"init must be 'zero' or 'uniform', got {self.init!r}")
        if self.problem_family != "regression":
            raise ConfigError("problem.family must be 'regression' from the CLI; custom oracles need the library API")
        if self.set_kind not in ("box", "ball"):
            raise ConfigError(f"set.kind must be 'box' or 'ball', got {self.set_kind!r}")
        if self.schedule_family not in SCHEDULE_FAMILIES:
            raise ConfigError(f"schedule.family must be one of {SCHEDULE_FAMILIES}, got {self.schedule_family!r}")
        if self.trigger_kind is not None and self.trigger_kind not in TRIGGER_KINDS:
            raise ConfigError(f"trigger.kind must be one of {TRIGGER_KINDS}, got {self.trigger_kind!r}")
        if self.graph_kind not in GRAPH_KINDS:
            raise ConfigError(f"graph.kind must be one of {GRAPH_KINDS}, got {self.graph_kind!r}")
        if not 0 <= self.graph_p_edge <= 1:
            raise ConfigError(f"graph.p_edge must lie in [0, 1], got {self.graph_p_edge!r}")
        if self.graph_b_window < 1:
            raise ConfigError(f"graph.b_window must be >= 1, got {self.graph_b_window!r}")
        try:
            self.build_set()
            self.build_schedule()
        except ParameterError as exc:
            raise ConfigError(str(exc)) from exc

    # -- builders ------------------------------------------------------------

    def build_set(self) -> FeasibleSet:
        cls = Box if self.set_kind == "box" else Ball
        return cls(self.set_size, self.p)

    def build_trigger(self):
        kind = self.trigger_kind
        if kind is None:
            kind = "power" if self.schedule_family == "theorem1" else "scaled_power"
        if kind == "power":
            return Power(self.trigger_theta)
        if kind == "geometric":
            return Geometric(self.trigger_c)
        if kind == "scaled_power":
            return ScaledPower(self.trigger_tau0, self.trigger_theta3)
        return NoTrigger()

    def build_schedule(self) -> Schedule:
        r = self.build_set().inner_radius
        trigger = self.build_trigger()
        if self.schedule_family == "theorem1":
            return Theorem1(self.schedule_kappa, trigger, r)
        if self.schedule_family == "theorem2":
            return Theorem2(self.schedule_alpha0, self.schedule_theta1, self.schedule_theta2, trigger, r)
        # paper-sec4: alpha = beta = gamma = 1/sqrt(t), tau = tau0 / t
        if not isinstance(trigger, NoTrigger):
            trigger = ScaledPower(self.trigger_tau0, 1.0)
        return Theorem2(1.0, 0.5, 0.5, trigger, r)

    def build_family(self) -> RegressionFamily:
        return RegressionFamily(self.n, self.p, self.q, self.m, self.seed)

    def build_graphs(self) -> GraphProcess:
        return GraphProcess(self.n, self.seed, self.graph_p_edge, self.graph_kind, self.graph_b_window)

    # -- serialization -------------------------------------------------------

    def as_dict(self) -> dict:
        """Config as a flat dict of dotted keys."""
        return {attr_to_key(f.name): getattr(self, f.name) for f in fields(self)}

    def hash(self) -> str:
        """SHA-256 of the config without the output directory."""
        d = self.as_dict()
        d.pop("out")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def replace(self, **overrides) -> "RunConfig":
        return dataclasses.replace(self, **overrides)


_ATTRS = {f.name: f for f in fields(RunConfig)}
_PREFIXES = ("problem", "set", "schedule", "trigger", "graph")


def attr_to_key(attr: str) -> str:
    head, _, tail = attr.partition("_")
    return f"{head}.{tail}" if head in _PREFIXES and tail else attr


def key_to_attr(key: str) -> str:
    return key.replace(".", "_").replace("-", "_")


PRESETS: dict[str, dict[str, Any]] = {
    "desk": {
        "n": 10, "p": 4, "q": 2, "m": 2, "T": 2000,
        "set.kind": "box", "set.size": 5.0,
        "schedule.family": "paper-sec4", "trigger.tau0": 4.0,
        "graph.kind": "paper4quarters", "graph.p_edge": 0.1, "graph.b_window": 4,
    },
    "paper-sec4": {
        "n": 100, "p": 10, "q": 4, "m": 2, "T": 1000,
        "set.kind": "box", "set.size": 5.0,
        "schedule.family": "paper-sec4", "trigger.tau0": 400.0,
        "graph.kind": "paper4quarters", "graph.p_edge": 0.1, "graph.b_window": 4,
    },
}


def _coerce(key: str, value: Any) -> Any:
    attr = key_to_attr(key)
    if attr not in _ATTRS:
        raise ConfigError(f"unknown config key {key!r}")
    ftype = str(_ATTRS[attr].type)
    if value is None:
        if "Optional" in ftype:
            return None
        raise ConfigError(f"config key {key!r} must not be empty")
    try:
        if ftype == "bool":
            if isinstance(value, str):
                low = value.strip().lower()
                if low not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(value)
                return low in ("true", "1", "yes")
            return bool(value)
        if ftype == "int":
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if ftype == "float":
            return float(value)
        value = str(value)
        if attr == "mode":
            value = value.replace("-", "_")
        return value
    except (TypeError, ValueError):
        raise ConfigError(f"config key {key!r} has invalid value {value!r} (expected {ftype})") from None


def load_config_file(path) -> dict[str, Any]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, Mapping):
        raise ConfigError(f"config file {path} must hold a flat key-value mapping")
    for key, value in data.items():
        if isinstance(value, (Mapping, list)):
            raise ConfigError(f"config key {key!r} must be a scalar (use dotted keys, e.g. graph.p_edge)")
    return {str(k): v for k, v in data.items()}


def parse_config(path=None, preset: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """Resolve a :class:`RunConfig` from an optional file, preset and overrides."""
    file_values = load_config_file(path) if path is not None else {}
    preset = preset or file_values.pop("preset", None)
    file_values.pop("preset", None)
    merged: dict[str, Any] = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; expected one of {sorted(PRESETS)}")
        merged.update(PRESETS[preset])
    merged.update(file_values)
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})

    kwargs = {key_to_attr(k): _coerce(k, v) for k, v in merged.items()}
    missing = [k for k in REQUIRED if k not in kwargs]
    if missing:
        raise ConfigError(f"missing required config key(s): {', '.join(missing)}")
    return RunConfig(**kwargs)
