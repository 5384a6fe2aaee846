"""Interface shared by every forecaster, and inverse-scaled forecasts."""

from __future__ import annotations

import enum
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from tempofuse.data.frame import BIN, format_utc
from tempofuse.data.scaling import ScalerParams, invert_scaler
from tempofuse.data.windows import WindowedDataset, WindowSpec
from tempofuse.errors import ShapeError


class ForecasterKind(str, enum.Enum):
    LINEAR_REGRESSION = "linear_regression"
    AUTOREGRESSIVE = "autoregressive"
    SEQ2SEQ = "seq2seq"
    SEQ2SEQ_ATTENTION = "seq2seq_attention"
    TFT = "tft"

    @property
    def label(self) -> str:
        return {"linear_regression": "Linear_Regression", "autoregressive": "Autoregressive",
                "seq2seq": "Seq2Seq", "seq2seq_attention": "Seq2Seq_Attention",
                "tft": "TFT"}[self.value]


@dataclass(frozen=True)
class ForecastResult:
    """Per-horizon forecast in demand units.

    ``issue_time`` is the start of the last observed bin; row ``h - 1`` of
    ``values`` predicts the bin starting at ``issue_time + h * 15 min``.
    """

    issue_time: np.datetime64
    horizon_times: np.ndarray
    quantile_levels: tuple[float, ...]
    values: np.ndarray

    @property
    def horizons(self) -> np.ndarray:
        return np.arange(1, len(self.horizon_times) + 1)

    @property
    def point(self) -> np.ndarray:
        return self.values[:, self.quantile_levels.index(0.5)]

    def to_dict(self) -> dict:
        return {
            "issue_time": format_utc(self.issue_time),
            "quantile_levels": list(self.quantile_levels),
            "horizons": [
                {"horizon": int(h), "bin_start": format_utc(t),
                 "values": [float(v) for v in row]}
                for h, t, row in zip(self.horizons, self.horizon_times, self.values)
            ],
        }


class Forecaster(ABC):
    """Fit on windowed samples, then map past and future-known blocks to horizons.

    Subclasses work in scaled units; :func:`predict` and :func:`forecast`
    apply the inverse scaling, the floor at zero and the quantile sort.
    """

    kind: ClassVar[ForecasterKind]

    def __init__(self, spec: WindowSpec, observed_names: tuple[str, ...] = ()):
        self.spec = spec
        self.observed_names = tuple(observed_names)
        self.scaler: ScalerParams | None = None

    @property
    def quantile_levels(self) -> tuple[float, ...]:
        return (0.5,)

    def check_dataset(self, dataset: WindowedDataset) -> None:
        if dataset.spec != self.spec:
            raise ShapeError(f"{self.kind.value}: dataset window {dataset.spec} does not match "
                             f"model window {self.spec}")
        if tuple(dataset.observed_names) != self.observed_names:
            raise ShapeError(f"{self.kind.value}: dataset observed columns "
                             f"{dataset.observed_names} != model columns {self.observed_names}")
        if len(dataset) == 0:
            raise ShapeError(f"{self.kind.value}: empty dataset")

    def fit(self, dataset: WindowedDataset):
        self.check_dataset(dataset)
        self.scaler = dataset.scaler
        return self._fit(dataset)

    @abstractmethod
    def _fit(self, dataset: WindowedDataset):
        ...

    @abstractmethod
    def predict_scaled(self, dataset: WindowedDataset) -> np.ndarray:
        """Raw outputs in scaled units, shape ``(n, n_look_ahead, Q)``."""

    def state(self) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        raise NotImplementedError


def to_demand(model: Forecaster, raw: np.ndarray) -> np.ndarray:
    values = raw if model.scaler is None else invert_scaler(raw, model.scaler)
    return np.sort(np.maximum(values, 0.0), axis=-1)


def predict(model: Forecaster, dataset: WindowedDataset) -> np.ndarray:
    """Demand-unit forecasts ``(n, n_look_ahead, Q)`` for every sample."""
    model.check_dataset(dataset)
    return to_demand(model, model.predict_scaled(dataset))


def forecast(model: Forecaster, dataset: WindowedDataset, index: int = 0) -> ForecastResult:
    """Forecast for one sample of ``dataset`` (past and future-known blocks)."""
    sample = dataset.subset(slice(index, index + 1))
    values = predict(model, sample)[0]
    issue = sample.issue_times[0]
    times = issue + BIN * np.arange(1, model.spec.n_look_ahead + 1)
    return ForecastResult(issue, times, model.quantile_levels, values)
