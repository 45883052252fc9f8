"""Training configuration shared by full-precision and quantization-aware runs."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .errors import InputError


@dataclass
class TrainConfig:
    """Hyperparameters. Defaults follow the reported MovieLens/Gowalla settings."""

    n_bits: int = 2
    dim: int = 64
    layers: int = 3
    reg: float = 5e-4
    lr: float = 1e-3
    batch_size: int = 5096
    epochs: int = 100
    list_len: int = 10
    eval_ks: tuple = (10, 20)
    seed: int = 2024
    val_ratio: float = 0.1
    init_std: float = 0.1
    use_dqs: bool = True
    use_rau: bool = True
    use_rank_loss: bool = True

    def __post_init__(self):
        self.eval_ks = tuple(int(k) for k in self.eval_ks)
        self.validate()

    def validate(self) -> None:
        for name in ("n_bits", "dim", "layers", "batch_size", "list_len"):
            if int(getattr(self, name)) < 1:
                raise InputError(f"{name} must be positive")
        if self.list_len < 2:
            raise InputError("list_len must be >= 2")
        if self.epochs < 0:
            raise InputError("epochs must be >= 0")
        if self.lr < 0 or self.reg < 0 or self.init_std <= 0:
            raise InputError("lr and reg must be non-negative, init_std positive")
        if not 0.0 < self.val_ratio < 1.0:
            raise InputError("val_ratio must lie in (0, 1)")
        if not self.eval_ks or min(self.eval_ks) < 1:
            raise InputError("eval_ks must be positive")
        if 20 not in self.eval_ks:
            self.eval_ks = tuple(sorted(set(self.eval_ks) | {20}))

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as e:
            raise InputError(str(e)) from e

    @classmethod
    def from_json(cls, path) -> "TrainConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise InputError(f"cannot read config {path}: {e}") from e
        if not isinstance(d, dict):
            raise InputError("config must be a JSON object")
        return cls.from_dict(d)

    def replace(self, **kw) -> "TrainConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["eval_ks"] = list(self.eval_ks)
        return d
