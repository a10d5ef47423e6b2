"""Run configuration: world, split, model and training sections in one JSON file."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .metrics import MODES
from .model import ModelConfig
from .training import TrainConfig
from .world import WorldConfig


class ConfigError(ValueError):
    """Invalid configuration; message starts with the offending field path."""


@dataclass(frozen=True)
class SplitConfig:
    num_train_houses: int = 20
    num_unseen_houses: int = 5
    train_episodes_per_house: int = 16
    val_seen_episodes_per_house: int = 2
    val_unseen_episodes_per_house: int = 16

    def validate(self):
        if self.num_train_houses < 1:
            raise ValueError("num_train_houses: must be >= 1")
        for f in dataclasses.fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name}: must be >= 0")


# model fields that are dictated by the generated world
DERIVED_MODEL_FIELDS = ("vocab_size", "object_feature_dim", "room_taxonomy_size")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    mode: str = "r2r"
    world: WorldConfig = field(default_factory=WorldConfig)
    splits: SplitConfig = field(default_factory=SplitConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "mode": self.mode,
            "world": dataclasses.asdict(self.world),
            "splits": dataclasses.asdict(self.splits),
            "model": self.model.to_dict(),
            "train": {k: v for k, v in self.train.to_dict().items() if k != "seed"},
        }

    def model_for(self, vocab_size: int) -> ModelConfig:
        return dataclasses.replace(
            self.model,
            vocab_size=vocab_size,
            object_feature_dim=self.world.object_feature_dim,
            room_taxonomy_size=self.world.room_taxonomy_size,
        )


_SECTIONS = {"world": WorldConfig, "splits": SplitConfig, "model": ModelConfig, "train": TrainConfig}


def _coerce(path: str, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)) or len(value) != len(default):
            raise ConfigError(f"{path}: expected a list of {len(default)} numbers")
        return tuple(float(v) for v in value)
    return value


def _section(name: str, cls, raw) -> object:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected an object")
    defaults = cls()
    known = {f.name for f in dataclasses.fields(cls)}
    kw = {}
    for key, value in raw.items():
        if name == "train" and key == "seed":
            raise ConfigError("train.seed: set the top-level seed instead")
        if key not in known:
            raise ConfigError(f"{name}.{key}: unknown field")
        kw[key] = _coerce(f"{name}.{key}", value, getattr(defaults, key))
    obj = cls(**kw)
    try:
        if name != "model":
            obj.validate()
    except ValueError as e:
        raise ConfigError(f"{name}.{e}") from None
    return obj


def parse_run_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>: expected a JSON object")
    known = {"seed", "mode", *_SECTIONS}
    for key in raw:
        if key not in known:
            raise ConfigError(f"{key}: unknown field")
    seed = _coerce("seed", raw.get("seed", 0), 0)
    mode = raw.get("mode", "r2r")
    if mode not in MODES:
        raise ConfigError(f"mode: expected one of {MODES}, got {mode!r}")
    sections = {name: _section(name, cls, raw.get(name)) for name, cls in _SECTIONS.items()}
    model = sections["model"]
    try:
        dataclasses.replace(model, vocab_size=max(model.vocab_size, 1)).validate()
    except ValueError as e:
        raise ConfigError(f"model.{e}") from None
    return RunConfig(seed=seed, mode=mode, **sections)


def load_run_config(path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"<file>: {path} not found") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"<file>: {path} is not valid JSON ({e})") from None
    return parse_run_config(raw)
