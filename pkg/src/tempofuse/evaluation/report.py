"""Scoring forecasters on held-out windows and comparing them side by side."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field

import numpy as np

from tempofuse.data.frame import TimeSeriesFrame, format_utc, to_datetime64
from tempofuse.data.scaling import apply_scaler
from tempofuse.data.windows import WindowedDataset, make_windows
from tempofuse.errors import DataError
from tempofuse.evaluation.metrics import compute_mae, compute_mse, explained_variance
from tempofuse.models.base import Forecaster, predict


def data_label(observed_names) -> str:
    return "ASPM&SWIM" if observed_names else "ASPM"


def model_frame(model: Forecaster, frame: TimeSeriesFrame) -> TimeSeriesFrame:
    """Restrict to the model's observed columns and apply its scaler."""
    missing = set(model.observed_names) - set(frame.observed_names)
    if missing:
        raise DataError(f"frame lacks observed columns {sorted(missing)} used by the model")
    keep = {k: frame.observed[k] for k in model.observed_names}
    raw = TimeSeriesFrame(frame.bin_start, frame.y, keep, frame.scaler, dict(frame.meta))
    if raw.scaler is None and model.scaler is not None:
        return apply_scaler(raw, model.scaler)
    return raw


@dataclass
class ScoredWindows:
    """Held-out windows with demand-unit truth and forecasts ``(n, tau[, Q])``."""

    dataset: WindowedDataset
    truth: np.ndarray
    forecasts: np.ndarray
    quantile_levels: tuple[float, ...]

    @property
    def point(self) -> np.ndarray:
        return self.forecasts[..., self.quantile_levels.index(0.5)]


def score_windows(model: Forecaster, frame: TimeSeriesFrame, test_start=None) -> ScoredWindows:
    """Forecast every window of ``frame`` whose first label bin is at/after ``test_start``.

    ``frame`` is in demand units; past blocks may reach back before
    ``test_start``.
    """
    if frame.scaler is not None:
        raise DataError("evaluation expects an unscaled frame")
    scaled = model_frame(model, frame)
    ds = make_windows(scaled, model.spec)
    if test_start is not None:
        first_label = ds.label_times()[:, 0]
        ds = ds.subset(np.flatnonzero(first_label >= to_datetime64(test_start)))
    if len(ds) == 0:
        raise DataError("no complete evaluation window in the test range")
    p, tau = model.spec.n_lag, model.spec.n_look_ahead
    idx = ds.starts[:, None] + p + np.arange(tau)
    return ScoredWindows(ds, frame.y[idx], predict(model, ds), model.quantile_levels)


@dataclass
class EvalReport:
    model: str
    data: str
    mse: float
    mae: float
    explained_variance: float
    n_lag: int
    n_look_ahead: int
    n: int
    horizon_mse: list[float] = field(default_factory=list)
    horizon_mae: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(**d)


def report_from_scores(model: Forecaster, scores: ScoredWindows) -> EvalReport:
    y, y_hat = scores.truth, scores.point
    return EvalReport(
        model=model.kind.label,
        data=data_label(model.observed_names),
        mse=compute_mse(y, y_hat),
        mae=compute_mae(y, y_hat),
        explained_variance=explained_variance(y, y_hat),
        n_lag=model.spec.n_lag,
        n_look_ahead=model.spec.n_look_ahead,
        n=int(y.size),
        horizon_mse=[compute_mse(y[:, h], y_hat[:, h]) for h in range(y.shape[1])],
        horizon_mae=[compute_mae(y[:, h], y_hat[:, h]) for h in range(y.shape[1])],
    )


def evaluate(model: Forecaster, frame: TimeSeriesFrame, test_start=None) -> EvalReport:
    """Pooled point-forecast metrics over every horizon of every held-out window."""
    return report_from_scores(model, score_windows(model, frame, test_start))


def plot_csv(scores: ScoredWindows, horizon: int = 1) -> str:
    """``bin_start,y_true,y_pred[,q25,q75]`` rows for one horizon step."""
    h = horizon - 1
    levels = scores.quantile_levels
    extra = [q for q in levels if q != 0.5]
    names = [f"q{round(q * 100):02d}" for q in extra]
    times = scores.dataset.label_times()[:, h]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bin_start", "y_true", "y_pred"] + names)
    for i, t in enumerate(times):
        row = [format_utc(t), repr(float(scores.truth[i, h])), repr(float(scores.point[i, h]))]
        row += [repr(float(scores.forecasts[i, h, levels.index(q)])) for q in extra]
        w.writerow(row)
    return buf.getvalue()


@dataclass
class ComparisonTable:
    reports: list[EvalReport]
    mse_comparison: list[float]

    @property
    def best(self) -> EvalReport:
        return self.reports[int(np.argmax(self.mse_comparison))]

    def rows(self) -> list[dict]:
        return [dict(r.to_dict(), mse_comparison=c)
                for r, c in zip(self.reports, self.mse_comparison)]

    def to_dict(self) -> dict:
        return {"rows": self.rows()}

    def render(self) -> str:
        header = ["data", "model", "mse", "mae", "explained_variance", "n_lag",
                  "n_look_ahead", "mse_comparison"]
        body = [[r.data, r.model, f"{r.mse:.2f}", f"{r.mae:.1f}", f"{r.explained_variance:.2f}",
                 str(r.n_lag), str(r.n_look_ahead), f"{100 * c:.0f}%"]
                for r, c in zip(self.reports, self.mse_comparison)]
        # "-0%" reads oddly for the best row
        for row in body:
            row[-1] = "0%" if row[-1] == "-0%" else row[-1]
        widths = [max(len(x) for x in col) for col in zip(header, *body)]
        lines = ["  ".join(x.ljust(wd) for x, wd in zip(row, widths)).rstrip()
                 for row in [header] + body]
        return "\n".join(lines) + "\n"


def compare_models(reports: list[EvalReport]) -> ComparisonTable:
    """Relative mse against the best row: ``(best - mse) / best``."""
    if len(reports) < 2:
        raise ValueError("a comparison needs at least two reports")
    best = min(r.mse for r in reports)
    if best <= 0:
        comparison = [0.0 if r.mse == best else -np.inf for r in reports]
    else:
        comparison = [(best - r.mse) / best for r in reports]
    return ComparisonTable(list(reports), comparison)
