"""Losses, optimizer, training loop and checkpoints for the neural forecasters."""

from tempofuse.training.config import TrainConfig, TrainReport
from tempofuse.training.losses import mse_loss, pinball_loss
from tempofuse.training.loop import chronological_split, train, validation_mse
from tempofuse.training.optim import Adam, clip_by_global_norm, global_norm

__all__ = ["TrainConfig", "TrainReport", "mse_loss", "pinball_loss", "train",
           "chronological_split", "validation_mse", "Adam", "clip_by_global_norm", "global_norm", "checkpoint_save", "checkpoint_load"]


def __getattr__(name):
    # checkpoints depend on the model registry, which imports this package
    if name in ("checkpoint_save", "checkpoint_load"):
        from tempofuse.models import checkpoint
        return getattr(checkpoint, name)
    raise AttributeError(name)
