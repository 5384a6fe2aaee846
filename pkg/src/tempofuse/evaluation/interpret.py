"""Variable importance and attention profiles read off a trained TFT."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from tempofuse.data.windows import WindowedDataset
from tempofuse.models.tft import TemporalFusionTransformer


def _require_tft(model) -> TemporalFusionTransformer:
    if not isinstance(model, TemporalFusionTransformer):
        raise TypeError(f"interpretability reports need a TFT, got {type(model).__name__}")
    return model


@dataclass
class VariableImportanceReport:
    past: dict[str, float]
    future: dict[str, float]

    def to_dict(self) -> dict:
        return {"past": dict(self.past), "future": dict(self.future)}

    def top(self, group: str = "future") -> str:
        weights = getattr(self, group)
        return max(weights, key=weights.get)


@dataclass
class AttentionProfile:
    """Mean attention per relative time index ``-n_lag .. n_look_ahead - 1``.

    Index -1 is the last observed bin.
    """

    index: np.ndarray
    score: np.ndarray

    def at(self, i: int) -> float:
        return float(self.score[int(np.flatnonzero(self.index == i)[0])])

    def to_dict(self) -> dict:
        return {"index": self.index.tolist(), "score": self.score.tolist()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time_index", "attention"])
        for i, s in zip(self.index, self.score):
            w.writerow([int(i), repr(float(s))])
        return buf.getvalue()


def variable_importance(model, dataset: WindowedDataset) -> VariableImportanceReport:
    """Selection weights averaged over samples and time steps, per group."""
    tft = _require_tft(model)
    info = tft.interpret(dataset)
    past = info.past_weights.reshape(-1, info.past_weights.shape[-1]).mean(axis=0)
    future = info.future_weights.reshape(-1, info.future_weights.shape[-1]).mean(axis=0)
    return VariableImportanceReport(
        dict(zip(tft.past_variables, map(float, past))),
        dict(zip(tft.future_variables, map(float, future))))


def attention_by_lag(model, dataset: WindowedDataset) -> AttentionProfile:
    """Head-averaged attention averaged over samples and horizon queries."""
    tft = _require_tft(model)
    attn = tft.interpret(dataset).attention          # (n, tau, p + tau)
    p = tft.spec.n_lag
    score = attn.mean(axis=(0, 1))
    return AttentionProfile(np.arange(attn.shape[-1]) - p, score)
