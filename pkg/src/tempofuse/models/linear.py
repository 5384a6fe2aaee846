"""Direct multi-output ridge regression on the flattened window."""

from __future__ import annotations

import numpy as np

from tempofuse.data.frame import CALENDAR_OFFSETS
from tempofuse.data.windows import WindowedDataset, WindowSpec
from tempofuse.layers import CALENDAR_VOCAB
from tempofuse.models.base import Forecaster, ForecasterKind

_VOCAB = np.array(list(CALENDAR_VOCAB.values()))
_STARTS = np.concatenate([[0], np.cumsum(_VOCAB)[:-1]])
ONE_HOT_WIDTH = int(_VOCAB.sum())


def one_hot_calendar(calendar: np.ndarray) -> np.ndarray:
    """``(..., 4)`` raw calendar values to ``(..., 47)`` concatenated one-hots."""
    idx = calendar - CALENDAR_OFFSETS + _STARTS
    out = np.zeros(calendar.shape[:-1] + (ONE_HOT_WIDTH,))
    np.put_along_axis(out, idx, 1.0, axis=-1)
    return out


def shared_features(ds: WindowedDataset, use_calendar: bool = True) -> np.ndarray:
    n = len(ds)
    parts = [ds.past_y, ds.past_observed.reshape(n, -1)]
    if use_calendar:
        parts.append(one_hot_calendar(ds.past_calendar).reshape(n, -1))
    return np.concatenate(parts, axis=1)


def horizon_features(ds: WindowedDataset, shared: np.ndarray, h: int,
                     use_calendar: bool = True) -> np.ndarray:
    """Design matrix for horizon ``h`` (0-based), with a leading intercept column."""
    parts = [np.ones((len(ds), 1)), shared]
    if use_calendar:
        parts.append(one_hot_calendar(ds.future_calendar[:, h]))
    return np.concatenate(parts, axis=1)


def ridge_lstsq(design: np.ndarray, target: np.ndarray, ridge: float) -> np.ndarray:
    """Ridge solution with the first (intercept) column unpenalized.

    Solved as an ordinary least-squares problem on the design stacked over
    ``sqrt(ridge) * I``, which avoids forming the normal equations.
    """
    d = design.shape[1]
    penalty = np.sqrt(ridge) * np.eye(d)[1:]
    aug = np.vstack([design, penalty])
    rhs = np.concatenate([target, np.zeros(d - 1)])
    coef, *_ = np.linalg.lstsq(aug, rhs, rcond=None)
    return coef


class LinearRegressionModel(Forecaster):
    kind = ForecasterKind.LINEAR_REGRESSION

    def __init__(self, spec: WindowSpec, observed_names: tuple[str, ...] = (),
                 ridge: float = 1e-6, use_calendar: bool = True):
        super().__init__(spec, observed_names)
        self.ridge = ridge
        self.use_calendar = use_calendar
        self.coef: np.ndarray | None = None       # (n_look_ahead, 1 + features)

    def _fit(self, ds: WindowedDataset):
        shared = shared_features(ds, self.use_calendar)
        self.coef = np.stack([
            ridge_lstsq(horizon_features(ds, shared, h, self.use_calendar), ds.labels[:, h],
                        self.ridge)
            for h in range(self.spec.n_look_ahead)
        ])
        return None

    def predict_scaled(self, ds: WindowedDataset) -> np.ndarray:
        if self.coef is None:
            raise RuntimeError("linear model is not fitted")
        shared = shared_features(ds, self.use_calendar)
        cols = [horizon_features(ds, shared, h, self.use_calendar) @ self.coef[h]
                for h in range(self.spec.n_look_ahead)]
        return np.stack(cols, axis=1)[..., None]

    def state(self):
        return {"coef": self.coef}

    def load_state(self, state):
        self.coef = np.asarray(state["coef"], dtype=np.float64)
