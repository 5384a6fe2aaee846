from __future__ import annotations

import warnings

import numpy as np


def _pair(y, y_hat) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64).ravel()
    y_hat = np.asarray(y_hat, dtype=np.float64).ravel()
    if y.shape != y_hat.shape:
        raise ValueError(f"length mismatch: {y.size} truths vs {y_hat.size} predictions")
    if y.size == 0:
        raise ValueError("metrics need at least one pair")
    return y, y_hat


def compute_mse(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    d = y - y_hat
    return float(np.dot(d, d) / d.size)


def compute_mae(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    return float(np.sum(np.abs(y - y_hat)) / y.size)


def explained_variance(y, y_hat) -> float:
    """``1 - Var(y - y_hat) / Var(y)`` with population variances.

    A constant truth has no variance to explain; the score is then 0.0 and a
    warning is issued.
    """
    y, y_hat = _pair(y, y_hat)
    if y.size < 2:
        raise ValueError("explained variance needs at least two pairs")
    var_y = float(np.var(y))
    if var_y == 0.0:
        warnings.warn("explained variance of a constant series is undefined; returning 0.0",
                      RuntimeWarning, stacklevel=2)
        return 0.0
    return 1.0 - float(np.var(y - y_hat)) / var_y
