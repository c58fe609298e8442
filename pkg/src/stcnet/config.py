"""Flat ``key = value`` run configuration.

Keys are namespaced by section::

    # desk-scale run
    generator.hidden = 16
    train.lr_g = 1e-3
    train.weights.gradient = 1.0
    synth.speed_factor = 4
    score.offset = 2

Unknown keys are rejected so typos do not silently fall back to defaults.
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .data import SyntheticSceneConfig
from .generator import GeneratorConfig
from .losses import LossWeights
from .training import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class BenchmarkConfig:
    canvas: int = 32
    n_train: int = 8
    n_test: int = 4
    train_length: int = 100
    test_length: int = 100
    test_anomalies: tuple = ("speed", "shape", "speed", "shape")
    scene: dict = field(default_factory=dict)  # SyntheticSceneConfig overrides


@dataclass
class RunConfig:
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    synth: BenchmarkConfig = field(default_factory=BenchmarkConfig)
    offset: int = 2
    score_batch: int = 32

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_BENCH_FIELDS = {f.name for f in dataclasses.fields(BenchmarkConfig)} - {"scene"}


def desk_config(seed: int = 0) -> RunConfig:
    """2-layer, 16-channel model on the 32x32 synthetic benchmark; a few minutes on one core."""
    return RunConfig(
        generator=GeneratorConfig(num_layers=2, hidden=16, kernel_size=3, patch=4),
        train=TrainConfig(lr_g=1e-3, lr_d=1e-4, iterations=1200, ss_ramp_iters=600, aux_warmup_iters=300,
                          seed=seed),
    )


def _coerce(raw: str, kind, key: str):
    origin = typing.get_origin(kind)
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is tuple or origin is tuple:
            return tuple(v.strip() for v in raw.split(",") if v.strip())
        if kind is str:
            return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {getattr(kind, '__name__', kind)}") from None
    raise ConfigError(f"{key}: unsupported field type {kind}")


def _scene_value(raw: str, key: str):
    name = key.split(".", 1)[1]
    hints = typing.get_type_hints(SyntheticSceneConfig)
    if name not in hints or name in ("seed", "anomaly", "anomaly_start", "anomaly_end", "length", "canvas"):
        raise ConfigError(f"unknown or reserved scene key {key!r}")
    return _coerce(raw, hints[name], key)


def _set(obj, path: list[str], raw: str, key: str):
    name = path[0]
    if not dataclasses.is_dataclass(obj) or name not in {f.name for f in dataclasses.fields(obj)}:
        raise ConfigError(f"unknown key {key!r}")
    current = getattr(obj, name)
    if len(path) > 1:
        _set(current, path[1:], raw, key)
        return
    if dataclasses.is_dataclass(current):
        raise ConfigError(f"{key} is a section, not a value")
    hints = typing.get_type_hints(type(obj))
    setattr(obj, name, _coerce(raw, hints[name], key))


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Apply ``key = value`` lines to ``base`` (default: the desk configuration)."""
    cfg = base if base is not None else desk_config()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        path = key.split(".")
        if path[0] == "synth" and len(path) == 2 and path[1] not in _BENCH_FIELDS:
            cfg.synth.scene[path[1]] = _scene_value(raw, key)
            continue
        if path[0] == "score" and len(path) == 2 and path[1] in ("offset", "batch"):
            setattr(cfg, "offset" if path[1] == "offset" else "score_batch", _coerce(raw, int, key))
            continue
        _set(cfg, path, raw, key)
    # re-run validation that lives in __post_init__
    try:
        cfg.train.weights = LossWeights(**dataclasses.asdict(cfg.train.weights))
        cfg.train = TrainConfig(**{f.name: getattr(cfg.train, f.name) for f in dataclasses.fields(cfg.train)})
        cfg.generator.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if not 0 <= cfg.offset < cfg.generator.predict:
        raise ConfigError(f"score.offset must lie in [0, {cfg.generator.predict})")
    return cfg


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, base)
