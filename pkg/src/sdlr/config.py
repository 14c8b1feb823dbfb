"""Experiment configuration: a flat JSON object, validated with field paths."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import ConfigError

EXPERIMENTS = ("gbm", "burgers", "oscillator", "custom-linear")
METHODS = ("sdlr", "do", "full_mc", "lindblad_ref", "lowrank_qme")
GENERATOR_METHODS = ("lindblad_ref", "lowrank_qme")
UNRAVELINGS = ("lqsd", "qsd")


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative experiment description (flat JSON on disk)."""

    experiment: str
    n: int
    rank_list: tuple[int, ...]
    samples: int
    dt: float
    T: float
    seed: int
    method_list: tuple[str, ...]
    omega: float = 1.0
    gamma1: float = 0.2
    gamma2: float = 0.0
    nu: float = 0.01
    gamma: float = 0.1
    theta_scale: float = 0.05
    eig_interval: tuple[float, float] = (-4.5, -0.5)
    unraveling: str = "lqsd"
    output_dir: str = "out"
    spectrum_k: int = 5

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                f"experiment: {self.experiment!r} not in {'/'.join(EXPERIMENTS)}"
            )
        if self.n < 2:
            raise ConfigError(f"n: must be at least 2, got {self.n}")
        if self.experiment == "burgers":
            if self.n % 2 == 0 or self.n < 5:
                raise ConfigError(f"n: burgers needs an odd mode count >= 5, got {self.n}")
            if self.nu <= 0:
                raise ConfigError(f"nu: viscosity must be positive, got {self.nu}")
        if self.experiment in ("gbm", "oscillator") and self.n < 5:
            raise ConfigError(f"n: {self.experiment} uses 5 initial atoms, needs n >= 5")
        if not self.rank_list:
            raise ConfigError("rank_list: must not be empty")
        for i, r in enumerate(self.rank_list):
            if not 1 <= r <= self.n:
                raise ConfigError(f"rank_list[{i}]: rank {r} outside [1, {self.n}]")
        if self.samples < 1:
            raise ConfigError(f"samples: must be at least 1, got {self.samples}")
        if self.dt <= 0:
            raise ConfigError(f"dt: must be positive, got {self.dt}")
        if self.T <= 0:
            raise ConfigError(f"T: must be positive, got {self.T}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed: must fit in 64 unsigned bits, got {self.seed}")
        if not self.method_list:
            raise ConfigError("method_list: must not be empty")
        for i, method in enumerate(self.method_list):
            if method not in METHODS:
                raise ConfigError(
                    f"method_list[{i}]: {method!r} not in {'/'.join(METHODS)}"
                )
            if method in GENERATOR_METHODS and self.experiment != "oscillator":
                raise ConfigError(
                    f"method_list[{i}]: {method} requires the oscillator experiment"
                )
        if self.unraveling not in UNRAVELINGS:
            raise ConfigError(
                f"unraveling: {self.unraveling!r} not in {'/'.join(UNRAVELINGS)}"
            )
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ConfigError("gamma1/gamma2: damping rates must be nonnegative")
        if self.theta_scale < 0:
            raise ConfigError(f"theta_scale: must be nonnegative, got {self.theta_scale}")
        if len(self.eig_interval) != 2 or self.eig_interval[0] > self.eig_interval[1]:
            raise ConfigError(f"eig_interval: not an ordered pair: {self.eig_interval}")
        if not 1 <= self.spectrum_k <= self.n:
            raise ConfigError(
                f"spectrum_k: must lie in [1, {self.n}], got {self.spectrum_k}"
            )


_FIELD_TYPES = {
    "experiment": str,
    "n": int,
    "samples": int,
    "seed": int,
    "spectrum_k": int,
    "dt": float,
    "T": float,
    "omega": float,
    "gamma1": float,
    "gamma2": float,
    "nu": float,
    "gamma": float,
    "theta_scale": float,
    "unraveling": str,
    "output_dir": str,
}


def _coerce(name: str, value, kind):
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name}: expected a number, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name}: expected an integer, got {value!r}")
        return value
    if not isinstance(value, str):
        raise ConfigError(f"{name}: expected a string, got {value!r}")
    return value


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("top level: expected a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    for key in data:
        if key not in known:
            raise ConfigError(f"{key}: unknown field")
    required = ("experiment", "n", "rank_list", "samples", "dt", "T", "seed", "method_list")
    for key in required:
        if key not in data:
            raise ConfigError(f"{key}: required field is missing")
    kwargs = {}
    for key, value in data.items():
        if key == "rank_list":
            if not isinstance(value, list) or not all(
                isinstance(r, int) and not isinstance(r, bool) for r in value
            ):
                raise ConfigError("rank_list: expected a list of integers")
            kwargs[key] = tuple(value)
        elif key == "method_list":
            if not isinstance(value, list) or not all(isinstance(s, str) for s in value):
                raise ConfigError("method_list: expected a list of strings")
            kwargs[key] = tuple(value)
        elif key == "eig_interval":
            if (
                not isinstance(value, list)
                or len(value) != 2
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
            ):
                raise ConfigError("eig_interval: expected a pair of numbers")
            kwargs[key] = (float(value[0]), float(value[1]))
        else:
            kwargs[key] = _coerce(key, value, _FIELD_TYPES[key])
    cfg = ExperimentConfig(**kwargs)
    cfg.validate()
    return cfg


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a flat JSON config; errors carry the field path."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    return config_from_dict(data)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical JSON text (sorted keys, stable formatting)."""
    data = asdict(cfg)
    data["rank_list"] = list(data["rank_list"])
    data["method_list"] = list(data["method_list"])
    data["eig_interval"] = list(data["eig_interval"])
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def load_config(path: str | Path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def save_config(cfg: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(serialize_config(cfg))
