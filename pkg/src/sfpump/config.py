"""YAML run configuration with strict key checking."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .ppo import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class EnvSection:
    max_steps: int = 100
    reward_norm: str = "positive_part_l1"
    action_clip: float = 10.0
    project_every_step: bool = True


@dataclass
class PoolSection:
    train_size: int = 200
    eval_size: int = 100
    train_seed: int = 1
    eval_seed: int = 2


@dataclass
class RunConfig:
    env: EnvSection = field(default_factory=EnvSection)
    train: TrainConfig = field(default_factory=TrainConfig)
    pools: PoolSection = field(default_factory=PoolSection)

    def to_dict(self) -> dict:
        return {"env": asdict(self.env), "train": asdict(self.train), "pools": asdict(self.pools)}


_SECTIONS = {"env": EnvSection, "train": TrainConfig, "pools": PoolSection}


def _build(cls, section: str, raw):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"section '{section}' must be a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in '{section}': {', '.join(unknown)}")
    default = cls()
    values = {}
    for key, value in raw.items():
        want = type(getattr(default, key))
        if want is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, want) or (want is int and isinstance(value, bool)):
            raise ConfigError(f"'{section}.{key}' must be of type {want.__name__}, got {value!r}")
        values[key] = value
    try:
        return cls(**values)
    except ValueError as exc:
        raise ConfigError(f"section '{section}': {exc}") from None


def parse_config(data) -> RunConfig:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping of sections")
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    return RunConfig(**{name: _build(cls, name, data.get(name)) for name, cls in _SECTIONS.items()})


def load_config(path) -> RunConfig:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data)
