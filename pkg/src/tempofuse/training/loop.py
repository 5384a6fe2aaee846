"""Mini-batch training with Adam, clipping and early stopping."""

from __future__ import annotations

import logging
import time

import numpy as np

from tempofuse.autodiff import Graph
from tempofuse.errors import NumericError
from tempofuse.training.config import TrainConfig, TrainReport
from tempofuse.training.optim import Adam, clip_by_global_norm

logger = logging.getLogger(__name__)


def chronological_split(n: int, config: TrainConfig, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Training and validation sample indices.

    The validation set is the last ``validation_fraction`` of the windows.
    Training windows whose labels would overlap the first validation label
    block are purged.
    """
    n_val = int(round(n * config.validation_fraction))
    if n_val == 0:
        return np.arange(n), np.arange(0)
    last_train = n - n_val - horizon
    if last_train <= 0:
        raise ValueError(f"{n} windows are too few for a validation split with "
                         f"horizon {horizon}")
    return np.arange(last_train), np.arange(n - n_val, n)


def validation_mse(model, dataset) -> float:
    raw = model.predict_scaled(dataset)
    point = raw[..., model.quantile_levels.index(0.5)]
    return float(np.mean((point - dataset.labels) ** 2))


def train(model, dataset, config: TrainConfig | None = None):
    """Fit ``model`` in place and return ``(model, TrainReport)``.

    Shuffling and dropout draw from generators seeded by ``config.seed``; the
    weights of the epoch with the lowest validation mse are restored at the
    end.  A non-finite loss raises :class:`NumericError`.
    """
    config = config or model.config
    started = time.perf_counter()
    report = TrainReport()
    if config.epochs == 0 or len(dataset) == 0:
        report.wall_time = time.perf_counter() - started
        return model, report

    train_idx, val_idx = chronological_split(len(dataset), config, model.spec.n_look_ahead)
    val_set = dataset.subset(val_idx) if len(val_idx) else None
    shuffle_rng = np.random.default_rng([config.seed, 1])
    dropout_rng = np.random.default_rng([config.seed, 2])
    params = model.parameters()
    optimizer = Adam(params, config.learning_rate)

    per_epoch = max(1, int(np.ceil(config.epoch_fraction * len(train_idx))))
    best = (np.inf, [p.value for p in params], 0)
    stale = 0
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(train_idx)[:per_epoch]
        total, count = 0.0, 0
        for b, lo in enumerate(range(0, len(order), config.batch_size)):
            batch = dataset.subset(np.sort(order[lo:lo + config.batch_size]))
            g = Graph(training=True, rng=dropout_rng)
            loss = model.loss(g, batch)
            value = float(loss.value[0])
            if not np.isfinite(value):
                raise NumericError(f"non-finite training loss at epoch {epoch}, batch {b + 1}")
            if epoch == 1 and b == 0:
                report.first_batch_loss = value
            grads = g.backward(loss)
            clipped, _ = clip_by_global_norm([grads[p] for p in params],
                                             config.gradient_clip_norm)
            optimizer.step(clipped)
            total += value * len(batch)
            count += len(batch)
        report.train_loss.append(total / count)
        score = validation_mse(model, val_set) if val_set is not None else report.train_loss[-1]
        if not np.isfinite(score):
            raise NumericError(f"non-finite validation loss at epoch {epoch}")
        report.validation_loss.append(score)
        logger.debug("epoch %d: train %.6f validation %.6f", epoch, report.train_loss[-1], score)
        report.stopped_epoch = epoch
        if score < best[0]:
            best = (score, [p.value for p in params], epoch)
            stale = 0
        else:
            stale += 1
            if stale >= config.early_stop_patience:
                break

    for p, value in zip(params, best[1]):
        p.value = value
    report.best_epoch = best[2]
    report.wall_time = time.perf_counter() - started
    return model, report
