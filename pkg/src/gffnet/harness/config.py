"""Experiment configuration: validation and YAML loading."""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

__all__ = ["ExperimentConfig", "ConfigError", "load_config", "EXPERIMENTS"]

EXPERIMENTS = (
    "duality-median",
    "quantile-table",
    "mesh-compare",
    "annulus-ratio",
    "exit-time-scaling",
    "lqg-moments",
    "identity-suite",
    "walk-consistency",
)
# tightness experiments refuse to run on a default gamma
NEEDS_GAMMA = ("duality-median", "quantile-table")
# extra keys that are not lengths or counts and may be zero
NON_GEOMETRIC = ("gammas", "cmp")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Settings for one registered experiment.

    ``geometry`` carries experiment-specific keys (``k``, ``side``, ``r_inner``,
    ``r_outer``, ``box``, ``zetas``, ...); missing keys fall back to the
    experiment's defaults.
    """

    experiment: str
    n_list: list = field(default_factory=lambda: [2, 3, 4, 5, 6])
    zeta_rule: object = "ceil-sqrt-n"
    gamma: float | None = None
    replicas: int = 500
    seed: int = 0
    tol: float = 1e-10
    output_dir: str = "out"
    geometry: dict = field(default_factory=dict)
    allow_small_zeta: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if int(self.replicas) != self.replicas or self.replicas < 1:
            raise ConfigError("replicas must be a positive integer")
        self.replicas = int(self.replicas)
        self.n_list = [int(n) for n in self.n_list]
        if not self.n_list or min(self.n_list) < 1:
            raise ConfigError("n_list must hold scales >= 1")
        if not (0 < self.tol <= 1e-6):
            raise ConfigError("tol must lie in (0, 1e-6]")
        if not (0 <= int(self.seed) < 2**64):
            raise ConfigError("seed must be an unsigned 64-bit integer")
        self.seed = int(self.seed)
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.gamma is None:
            if self.experiment in NEEDS_GAMMA:
                raise ConfigError(f"{self.experiment} needs an explicit gamma")
            self.gamma = 0.2
        self.gamma = float(self.gamma)
        if self.gamma < 0:
            raise ConfigError("gamma must be non-negative")
        if self.gamma > 0.5:
            warnings.warn(f"gamma = {self.gamma} is above 0.5; tightness is only expected for small gamma")
        for key, val in self.geometry.items():
            if key in NON_GEOMETRIC:
                continue
            vals = val if isinstance(val, (list, tuple)) else [val]
            if any(isinstance(v, (int, float)) and not isinstance(v, bool) and v <= 0 for v in vals):
                raise ConfigError(f"geometry parameter {key} must be positive")
        for n in self.n_list:
            self.zeta(n)

    def zeta(self, n: int) -> int:
        """Mesh multiplier at scale ``n``."""
        rule = self.zeta_rule
        if rule == "ceil-sqrt-n":
            z = math.isqrt(n - 1) + 1
        elif isinstance(rule, dict):
            z = int(rule[n])
        elif isinstance(rule, (list, tuple)):
            z = int(rule[self.n_list.index(n)])
        else:
            z = int(rule)
        if z < math.isqrt(n - 1) + 1 and not self.allow_small_zeta:
            raise ConfigError(f"zeta={z} at n={n} is below ceil(sqrt(n)); set allow_small_zeta to override")
        return z

    def geo(self, key: str, default):
        return self.geometry.get(key, default)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        norm = {str(k).replace("-", "_"): v for k, v in dict(data).items()}
        known = {f.name for f in fields(cls)}
        extra = {k: v for k, v in norm.items() if k not in known}
        geometry = dict(norm.pop("geometry", {}) or {})
        for k in extra:
            geometry[k] = norm.pop(k)
        return cls(geometry=geometry, **norm)


def load_config(path, **overrides) -> ExperimentConfig:
    """Read a YAML mapping; keyword overrides that are not None win."""
    data = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a key/value mapping")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_mapping(data)
