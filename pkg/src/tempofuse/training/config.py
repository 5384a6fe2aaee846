from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

import numpy as np


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for the neural forecasters.

    ``dropout_rate`` may be 0 to disable dropout.  ``epoch_fraction`` below 1
    trains each epoch on a fresh random subset of that share of the training
    windows; a random subset keeps every time-of-day phase represented, which
    a fixed stride would not.
    """

    learning_rate: float = 1e-3
    epochs: int = 30
    batch_size: int = 64
    seed: int = 0
    hidden_dim: int = 16
    embedding_dim: int = 4
    attention_heads: int = 4
    dropout_rate: float = 0.1
    quantile_levels: tuple[float, ...] = (0.25, 0.5, 0.75)
    gradient_clip_norm: float = 1.0
    early_stop_patience: int = 5
    validation_fraction: float = 0.1
    epoch_fraction: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "quantile_levels", tuple(float(q) for q in self.quantile_levels))
        positive = ("learning_rate", "batch_size", "hidden_dim", "embedding_dim",
                    "attention_heads", "gradient_clip_norm", "early_stop_patience")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if not 0.0 < self.epoch_fraction <= 1.0:
            raise ValueError(f"epoch_fraction must lie in (0, 1], got {self.epoch_fraction}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in [0, 1)")
        q = self.quantile_levels
        if not q or any(not 0.0 < v < 1.0 for v in q) or any(b <= a for a, b in zip(q, q[1:])):
            raise ValueError(f"quantile levels must be strictly increasing in (0, 1): {q}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["quantile_levels"] = list(self.quantile_levels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown training options: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrainReport:
    train_loss: list[float] = field(default_factory=list)
    validation_loss: list[float] = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0
    first_batch_loss: float | None = None
    wall_time: float = 0.0

    def __post_init__(self):
        for v in self.train_loss + self.validation_loss:
            if not np.isfinite(v):
                raise ValueError("training report holds a non-finite loss")

    def to_dict(self, include_time: bool = True) -> dict:
        d = asdict(self)
        if not include_time:
            d.pop("wall_time")
        return d
