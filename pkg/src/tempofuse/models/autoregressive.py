"""Univariate autoregression fitted by conditional least squares."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tempofuse.data.windows import WindowedDataset, WindowSpec
from tempofuse.errors import DataError
from tempofuse.models.base import Forecaster, ForecasterKind


@dataclass(frozen=True)
class ARParams:
    """``y_t = intercept + sum_i coefficients[i - 1] * y_{t - i} + noise``."""

    intercept: float
    coefficients: np.ndarray
    residual_variance: float

    @property
    def order(self) -> int:
        return len(self.coefficients)


def _lagged(series: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    # row j holds y_{t-1}, ..., y_{t-p} for target t = j + p
    n = len(series)
    lags = np.column_stack([series[order - i:n - i] for i in range(1, order + 1)])
    return lags, series[order:]


def fit_ar_lags(lags: np.ndarray, target: np.ndarray) -> ARParams:
    """Least squares on rows of lag values ordered most recent first."""
    n, p = lags.shape
    design = np.column_stack([np.ones(n), lags])
    # minimum-norm solution keeps constant or collinear histories well defined
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    resid = target - design @ coef
    dof = max(n - p - 1, 1)
    return ARParams(float(coef[0]), coef[1:].copy(), float(resid @ resid / dof))


def fit_ar(series, order: int) -> ARParams:
    series = np.asarray(series, dtype=np.float64)
    if order < 1:
        raise DataError(f"AR order must be >= 1, got {order}")
    if len(series) < order + 1:
        raise DataError(f"series of length {len(series)} is too short for AR({order})")
    return fit_ar_lags(*_lagged(series, order))


def ar_recursive(params: ARParams, history: np.ndarray, steps: int) -> np.ndarray:
    """Iterate the recurrence from ``history`` (..., >= p) for ``steps`` steps."""
    p = params.order
    buf = np.array(history[..., -p:], dtype=np.float64)
    phi_oldest_first = params.coefficients[::-1]
    out = np.empty(buf.shape[:-1] + (steps,))
    for s in range(steps):
        nxt = params.intercept + buf @ phi_oldest_first
        out[..., s] = nxt
        buf = np.concatenate([buf[..., 1:], nxt[..., None]], axis=-1)
    return out


class AutoregressiveModel(Forecaster):
    """Uses only the target's own history; exogenous inputs are ignored."""

    kind = ForecasterKind.AUTOREGRESSIVE

    def __init__(self, spec: WindowSpec, observed_names: tuple[str, ...] = (),
                 params: ARParams | None = None):
        super().__init__(spec, observed_names)
        self.params = params

    def _fit(self, ds: WindowedDataset):
        lags = ds.past_y[:, ::-1]
        self.params = fit_ar_lags(lags, ds.labels[:, 0])
        return None

    def predict_scaled(self, ds: WindowedDataset) -> np.ndarray:
        if self.params is None:
            raise RuntimeError("autoregressive model is not fitted")
        return ar_recursive(self.params, ds.past_y, self.spec.n_look_ahead)[..., None]

    def state(self):
        p = self.params
        return {"intercept": np.array([p.intercept]), "coefficients": p.coefficients,
                "residual_variance": np.array([p.residual_variance])}

    def load_state(self, state):
        self.params = ARParams(float(state["intercept"][0]),
                               np.asarray(state["coefficients"], dtype=np.float64),
                               float(state["residual_variance"][0]))
