"""Run configuration: defaults per task, JSON round trip, strict key checking."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

GEOLOC, DAMAGE = "geoloc", "damage"
VIEW_MODES = ("cross", "street", "sat")

# the damage model the reference recipe targets is ~20M parameters; the
# micro model scales the reference learning rate by sqrt(params/20M)
REFERENCE_DAMAGE_LR = 0.03
REFERENCE_DAMAGE_PARAMS = 20_000_000


def scaled_damage_lr(param_count: int) -> float:
    return REFERENCE_DAMAGE_LR * (param_count / REFERENCE_DAMAGE_PARAMS) ** 0.5


@dataclass
class TrainConfig:
    task: str
    data_dir: str = ""
    epochs: int = 10
    batch_size: int = 16
    base_lr: float = 1e-4
    weight_decay: float = 0.01
    warmup_epochs: int = 1
    label_smoothing: float = 0.1
    temperature: float = 0.07
    learnable_temperature: bool = False
    margin: float = 0.5
    split_ratio: str = "5:5"
    seed: int = 0
    dtype: str = "f32"
    input_height: int = 64
    crop_frac: float = 0.125
    embed_dim: int = 64
    aug_flip: bool = True
    aug_rotate: bool = True
    aug_grid_dropout: bool = False
    aug_coarse_dropout: bool = False
    aug_color_jitter: bool = False
    color_jitter_strength: float = 0.4
    view_mode: str = "cross"
    use_reference_lr: bool = False  # damage: take the full-size recipe's 0.03
    eval_every: int = 0  # epochs between held-out evals; 0 = final only

    def __post_init__(self):
        if self.task not in (GEOLOC, DAMAGE):
            raise ValueError(f"task must be geoloc or damage, got {self.task!r}")
        if self.base_lr <= 0:
            raise ValueError(f"base_lr must be positive, got {self.base_lr}")
        if not 0 <= self.warmup_epochs < self.epochs:
            raise ValueError(f"warmup_epochs {self.warmup_epochs} must lie in [0, epochs={self.epochs})")
        if self.dtype not in ("f32", "f64"):
            raise ValueError(f"dtype must be f32 or f64, got {self.dtype!r}")
        if self.view_mode not in VIEW_MODES:
            raise ValueError(f"view_mode must be one of {VIEW_MODES}, got {self.view_mode!r}")
        if self.batch_size < 2:
            raise ValueError(f"batch_size must be at least 2, got {self.batch_size}")
        parse_ratio(self.split_ratio)

    def numpy_dtype(self):
        import numpy as np

        return np.float32 if self.dtype == "f32" else np.float64


def parse_ratio(text: str) -> tuple[int, int]:
    parts = text.split(":")
    if len(parts) != 2:
        raise ValueError(f"split ratio must look like 'a:b', got {text!r}")
    a, b = (int(p) for p in parts)
    if a <= 0 or b <= 0:
        raise ValueError(f"split ratio terms must be positive, got {text!r}")
    return a, b


def default_geoloc_config(**overrides) -> TrainConfig:
    base = dict(task=GEOLOC, epochs=10, batch_size=16, base_lr=1e-4, weight_decay=0.01, warmup_epochs=1)
    base.update(overrides)
    return TrainConfig(**base)


def default_damage_config(param_count: int | None = None, **overrides) -> TrainConfig:
    lr = REFERENCE_DAMAGE_LR if overrides.get("use_reference_lr") else scaled_damage_lr(param_count or 600_000)
    base = dict(
        task=DAMAGE,
        epochs=100,
        batch_size=16,
        base_lr=lr,
        weight_decay=0.05,
        warmup_epochs=10,
    )
    base.update(overrides)
    return TrainConfig(**base)


def config_to_dict(cfg: TrainConfig) -> dict:
    return dataclasses.asdict(cfg)


def config_from_dict(data: dict) -> TrainConfig:
    known = {f.name for f in dataclasses.fields(TrainConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return TrainConfig(**data)


def load_config(path) -> TrainConfig:
    with open(Path(path), encoding="utf-8") as f:
        return config_from_dict(json.load(f))


def save_config(cfg: TrainConfig, path):
    with open(Path(path), "w", encoding="utf-8") as f:
        json.dump(config_to_dict(cfg), f, indent=2, sort_keys=True)
        f.write("\n")
