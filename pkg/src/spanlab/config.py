"""Training configuration, its on-disk key-value form, and seeded RNG streams."""
from __future__ import annotations

import configparser
import math
import os
import zlib
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

CONFIG_VERSION = 1
SEED_ENV = "SPANLAB_SEED"


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-5
    batch_size: int = 32
    max_epochs: int = 20
    patience: int = 5
    alpha: float = 0.8
    weight_decay: float = 0.01
    seed: int = 0
    dim: int = 64
    max_len: int = 128
    min_count: int = 1
    # seq2seq only
    template: int = 4
    few_shot: bool = True
    beam: int = 3
    strategy: str = "beam"

    def __post_init__(self):
        if not (self.learning_rate >= 0 and math.isfinite(self.learning_rate)):
            raise ValueError("learning_rate must be a non-negative real")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.max_epochs < 0 or not 0 <= self.patience <= max(self.max_epochs, 0):
            raise ValueError("need 0 <= patience <= max_epochs")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.template not in (1, 2, 3, 4):
            raise ValueError("template must be 1..4")
        if self.strategy not in ("beam", "likelihood"):
            raise ValueError("strategy must be 'beam' or 'likelihood'")
        if self.beam < 1:
            raise ValueError("beam must be >= 1")

    def replace(self, **changes) -> "TrainConfig":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)


def _coerce(kind, raw: str):
    if kind is bool or kind == "bool":
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if kind is int or kind == "int":
        return int(raw)
    if kind is float or kind == "float":
        return float(raw)
    return raw.strip()


def with_env_seed(config: TrainConfig) -> TrainConfig:
    raw = os.environ.get(SEED_ENV)
    return config.replace(seed=int(raw)) if raw not in (None, "") else config


def load_config(path: str | Path, base: TrainConfig | None = None) -> TrainConfig:
    """Read a ``[spanlab]`` key-value file; ``SPANLAB_SEED`` overrides ``seed``."""
    parser = configparser.ConfigParser()
    parser.read_string(Path(path).read_text(encoding="utf-8"))
    if not parser.has_section("spanlab"):
        raise ValueError(f"{path}: missing [spanlab] section")
    section = parser["spanlab"]
    version = int(section.get("version", "0"))
    if version != CONFIG_VERSION:
        raise ValueError(f"{path}: unsupported config version {version}")
    types = {f.name: f.type for f in fields(TrainConfig)}
    values = {}
    for key, raw in section.items():
        if key == "version":
            continue
        if key not in types:
            raise ValueError(f"{path}: unknown key {key!r}")
        values[key] = _coerce(types[key], raw)
    return with_env_seed((base or TrainConfig()).replace(**values))


def dump_config(config: TrainConfig) -> str:
    lines = ["[spanlab]", f"version = {CONFIG_VERSION}"]
    lines += [f"{k} = {v}" for k, v in config.as_dict().items()]
    return "\n".join(lines) + "\n"


def rng_stream(seed: int, *keys: int | str) -> np.random.Generator:
    """Counter-based generator for ``(seed, *keys)``; streams never overlap."""
    words = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    words += [zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))
