"""Run configuration: dataclass defaults plus a diffable text format.

Config files are plain ``key = value`` lines (``#`` comments allowed).
Unknown keys, type errors and out-of-range values are rejected by name;
missing keys fall back to the defaults below. ``p_thresh`` and the LNT
Q-threshold resolve per environment / reward mode when left unset.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .envs import DEFAULT_TASKS, ENV_NAMES, make_env

BASELINE_MODES = ("none", "lnt", "lnt-sparse")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    env: str = "planar-peg"
    task: str = ""  # empty = environment's default task
    total_steps: int = 100_000
    p_thresh: float = -1.0  # negative = environment's default threshold
    gamma: float = 0.99
    n_step: int = 10
    ensemble_size: int = 5
    prior_scale: float = 3.0
    tau: float = 1e-3
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    buffer_capacity: int = 500_000
    example_capacity: int = 10_000
    batch_size: int = 256
    reset_batch_size: int = 128
    noise_sigma: float = 0.1
    warmup_steps: int = 1000
    eval_interval: int = 5000
    seed: int = 0
    baseline: str = "none"
    trigger_enabled: bool = True
    eval_trigger: bool = True
    hidden_dims: tuple[int, ...] = (400, 300)
    lnt_ensemble_size: int = 20
    lnt_q_thresh: float = -1.0  # negative = mode default (20 shaped, 0.1 sparse)
    checkpoint_interval: int = 0  # 0 = final checkpoint only

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.env not in ENV_NAMES:
            raise ConfigError(f"env: unknown environment {self.env!r}")
        if not self.task:
            self.task = DEFAULT_TASKS[self.env]
        try:
            env = make_env(self.env, self.task)
        except ValueError as exc:
            raise ConfigError(f"task: {exc}") from exc
        if self.p_thresh < 0:
            self.p_thresh = env.spec.default_p_thresh
        if not 0.0 <= self.p_thresh <= 1.0:
            raise ConfigError(f"p_thresh: {self.p_thresh} outside [0, 1]")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError(f"gamma: {self.gamma} outside [0, 1)")
        for key in ("tau", "actor_lr", "critic_lr"):
            value = getattr(self, key)
            if not 0.0 < value <= 1.0:
                raise ConfigError(f"{key}: {value} outside (0, 1]")
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma: must be >= 0")
        for key in ("total_steps", "warmup_steps", "checkpoint_interval"):
            if getattr(self, key) < 0:
                raise ConfigError(f"{key}: must be >= 0")
        for key in ("n_step", "ensemble_size", "lnt_ensemble_size", "buffer_capacity",
                    "example_capacity", "batch_size", "reset_batch_size", "eval_interval"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key}: must be >= 1")
        if self.prior_scale < 0:
            raise ConfigError("prior_scale: must be >= 0")
        if self.baseline not in BASELINE_MODES:
            raise ConfigError(f"baseline: {self.baseline!r} not one of {BASELINE_MODES}")
        if self.lnt_q_thresh < 0 and self.baseline != "none":
            self.lnt_q_thresh = 20.0 if self.baseline == "lnt" else 0.1
        self.hidden_dims = tuple(int(h) for h in self.hidden_dims)
        if not self.hidden_dims or any(h < 1 for h in self.hidden_dims):
            raise ConfigError("hidden_dims: need at least one positive layer width")

    @property
    def reward_mode(self) -> Optional[str]:
        return {"none": None, "lnt": "shaped", "lnt-sparse": "sparse"}[self.baseline]


def _parse_value(key: str, raw: str, field_type) -> object:
    raw = raw.strip()
    try:
        if field_type is bool:
            low = raw.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(f"{raw!r} is not a boolean")
        if field_type is int:
            return int(raw)
        if field_type is float:
            return float(raw)
        if field_type is str:
            return raw
        # the only remaining field type is the hidden_dims tuple
        return tuple(int(part) for part in raw.replace("(", "").replace(")", "").split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {getattr(field_type, '__name__', field_type)}") from exc


_FIELD_TYPES = {f.name: type(f.default) for f in dataclasses.fields(RunConfig)}


def parse_config_text(text: str, overrides: Optional[dict] = None) -> RunConfig:
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown key {key!r}")
        if key in values:
            raise ConfigError(f"duplicate key {key!r}")
        values[key] = _parse_value(key, raw, _FIELD_TYPES[key])
    if overrides:
        values.update(overrides)
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path, overrides: Optional[dict] = None) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(), overrides)


def config_to_text(cfg: RunConfig) -> str:
    """Fully-resolved config echo, parseable by load_config."""
    lines = []
    for f in dataclasses.fields(RunConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
