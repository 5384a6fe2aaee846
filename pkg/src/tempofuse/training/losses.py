"""Squared-error and pinball losses, on arrays or on graph nodes."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from tempofuse.autodiff import Graph, Node
from tempofuse.errors import ShapeError


def _check_pair(pred_shape, label_shape):
    if tuple(pred_shape) != tuple(label_shape):
        raise ShapeError(f"loss: prediction shape {tuple(pred_shape)} != label shape "
                         f"{tuple(label_shape)}")
    if int(np.prod(pred_shape)) == 0:
        raise ValueError("loss of empty input")


def _check_levels(levels) -> np.ndarray:
    q = np.asarray(levels, dtype=np.float64).ravel()
    if q.size == 0 or np.any(q <= 0) or np.any(q >= 1):
        raise ValueError(f"quantile levels must lie in (0, 1): {q.tolist()}")
    return q


def mse_loss(pred, label):
    """Mean squared difference; a ``Node`` for node input, else a float."""
    if isinstance(pred, Node):
        g: Graph = pred.graph
        _check_pair(pred.shape, np.shape(label.value if isinstance(label, Node) else label))
        diff = pred - label
        return g.mean(diff * diff)
    pred, label = np.asarray(pred, float), np.asarray(label, float)
    _check_pair(pred.shape, label.shape)
    return float(np.mean((pred - label) ** 2))


def pinball_loss(pred, label, levels: Sequence[float]):
    """Quantile loss averaged over elements and levels.

    ``pred`` has a trailing axis of one column per level; ``label`` lacks it.
    Per element: ``max(q * e, (q - 1) * e)`` with ``e = label - pred``, written
    as ``q * e + relu(-e)`` on the graph.
    """
    q = _check_levels(levels)
    if isinstance(pred, Node):
        g: Graph = pred.graph
        lab = label.value if isinstance(label, Node) else np.asarray(label, float)
        if pred.shape[-1] != q.size:
            raise ShapeError(f"pinball_loss: {pred.shape[-1]} columns for {q.size} levels")
        _check_pair(pred.shape[:-1], lab.shape)
        if not isinstance(label, Node):
            label = g.constant(lab[..., None])
        else:
            label = g.reshape(label, lab.shape + (1,))
        err = label - pred
        return g.mean(err * q + g.relu(-err))
    pred, label = np.asarray(pred, float), np.asarray(label, float)
    if pred.shape[-1] != q.size:
        raise ShapeError(f"pinball_loss: {pred.shape[-1]} columns for {q.size} levels")
    _check_pair(pred.shape[:-1], label.shape)
    err = label[..., None] - pred
    return float(np.mean(np.maximum(q * err, (q - 1) * err)))
