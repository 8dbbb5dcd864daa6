"""Run configuration: built-in defaults < config file < command-line flags.

The config file is flat ``key = value`` text, one pair per line, ``#``
comments allowed. Keys are :class:`RunConfig` field names; the dotted
spellings ``dither.amplitude``, ``dropout.rate`` and ``replicas.count`` are
accepted as aliases.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

from .engine import FORGETTING_BIAS, LEARNING_BIAS, BiasSchedule, ExperimentConfig, TrainConfig
from .errors import ConfigError
from .regularize import DitherSpec, DropoutSpec, ReplicaConfig

ALIASES = {
    "dither.amplitude": "dither_amplitude",
    "dropout.rate": "dropout_rate",
    "replicas.count": "replicas",
    "eval-every": "eval_every",
}

COMMAND_DEFAULTS: dict[str, dict[str, Any]] = {
    "learn": {"bias": LEARNING_BIAS.label(), "iters": 30000, "learning_rate": 0.5},
    "forget": {"bias": FORGETTING_BIAS.label(), "iters": 20000, "learning_rate": 0.7},
}


@dataclass
class RunConfig:
    mnist: str | None = None
    ckpt: str | None = None
    out: str = "runs"
    seed: int = 0
    init_seed: int | None = None
    split_seed: int | None = None
    sampler_seed: int | None = None
    dither_seed: int | None = None
    learning_rate: float | None = None
    recall_learning_rate: float = 300.0
    replicas: int = 100
    dither_amplitude: float = 1.0
    dropout_rate: float = 0.5
    dither_class_input: bool = False
    bias: str | None = None
    epochs: int = 100
    iters: int | None = None
    eval_every: int = 1
    classes: str = "0-9"
    originals: bool = False

    def resolve(self, command: str) -> "RunConfig":
        """Fill command-specific and derived defaults; validate everything."""
        cfg = dataclasses.replace(self)
        for key, value in COMMAND_DEFAULTS.get(command, {}).items():
            if getattr(cfg, key) is None:
                setattr(cfg, key, value)
        if cfg.learning_rate is None:
            cfg.learning_rate = 0.5
        if cfg.init_seed is None:
            cfg.init_seed = cfg.seed + 1
        if cfg.sampler_seed is None:
            cfg.sampler_seed = cfg.seed + 2
        if cfg.dither_seed is None:
            cfg.dither_seed = cfg.seed + 3
        if cfg.split_seed is None:
            cfg.split_seed = cfg.seed
        cfg.train_config()
        if cfg.bias is not None:
            cfg.bias_schedule()
        if cfg.epochs < 0:
            raise ConfigError("epochs must be non-negative")
        if cfg.iters is not None and cfg.iters < 0:
            raise ConfigError("iters must be non-negative")
        if cfg.eval_every < 1:
            raise ConfigError("eval_every must be at least 1")
        return cfg

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=float(self.learning_rate if self.learning_rate is not None else 0.5),
            recall_learning_rate=float(self.recall_learning_rate),
            replicas=ReplicaConfig(int(self.replicas)),
            dither=DitherSpec(float(self.dither_amplitude)),
            dropout=DropoutSpec(float(self.dropout_rate)),
            dither_class_input=bool(self.dither_class_input),
            dither_seed=int(self.dither_seed if self.dither_seed is not None else self.seed + 3),
        )

    def bias_schedule(self) -> BiasSchedule:
        return parse_bias(self.bias or "")

    def experiment_config(self, stop_when_learned: bool) -> ExperimentConfig:
        return ExperimentConfig(
            train=self.train_config(),
            bias=self.bias_schedule(),
            iters=int(self.iters or 0),
            eval_every=int(self.eval_every),
            sampler_seed=int(self.sampler_seed),  # type: ignore[arg-type]
            init_seed=int(self.init_seed),  # type: ignore[arg-type]
            stop_when_learned=stop_when_learned,
        )

    def items(self) -> list[tuple[str, Any]]:
        return [(f.name, getattr(self, f.name)) for f in fields(self)]


def parse_bias(text: str) -> BiasSchedule:
    parts = [p.strip() for p in str(text).split(",")]
    if len(parts) != 3 or not all(parts):
        raise ConfigError(f"bias must be three comma-separated probabilities, got {text!r}")
    try:
        probs = [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"bias {text!r} is not numeric") from exc
    if any(p < 0 for p in probs):
        raise ConfigError(f"bias {text!r} has a negative probability")
    if abs(sum(probs) - 1.0) > 1e-9:
        raise ConfigError(f"bias {text!r} does not sum to 1")
    # absorb the tolerated rounding so the schedule's own 1e-12 check holds
    probs[0] = 1.0 - probs[1] - probs[2]
    return BiasSchedule(*probs)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str) -> Any:
    kind = _FIELD_TYPES[key]
    text = raw.strip()
    if text.lower() in ("", "none") and "None" in kind:
        return None
    try:
        if kind.startswith("bool"):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind.startswith("int"):
            return int(text)
        if kind.startswith("float"):
            return float(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return text


def canonical_key(key: str) -> str:
    key = ALIASES.get(key.strip(), key.strip())
    key = key.replace("-", "_")
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    return key


def parse_config_text(text: str) -> dict[str, Any]:
    values: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = line.split("=", 1)
        key = canonical_key(key)
        values[key] = _coerce(key, raw)
    return values


def load_config_file(path: str | os.PathLike) -> dict[str, Any]:
    return parse_config_text(Path(path).read_text())


def build_config(file_values: dict[str, Any] | None = None, flag_values: dict[str, Any] | None = None) -> RunConfig:
    cfg = RunConfig()
    for layer in (file_values or {}, flag_values or {}):
        for key, value in layer.items():
            if value is not None:
                setattr(cfg, canonical_key(key), value)
    return cfg


def format_value(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: RunConfig, skip: tuple[str, ...] = ()) -> str:
    return "".join(f"{k} = {format_value(v)}\n" for k, v in cfg.items() if k not in skip)
