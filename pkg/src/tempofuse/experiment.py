"""Fit-and-score plumbing shared by the command line and the acceptance suite."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from tempofuse.data.frame import TimeSeriesFrame, split_train_test
from tempofuse.data.scaling import apply_scaler, fit_scaler
from tempofuse.data.windows import WindowSpec, make_windows
from tempofuse.evaluation.report import ComparisonTable, EvalReport, compare_models, evaluate
from tempofuse.models import ForecasterKind, create_model, default_window
from tempofuse.models.base import Forecaster
from tempofuse.training.config import TrainConfig

logger = logging.getLogger(__name__)

# Rows of the comparison: every kind on the demand record alone, plus the TFT
# with the event stream.
COMPARISON_PLAN = [(kind, False) for kind in ForecasterKind] + [(ForecasterKind.TFT, True)]


@dataclass
class ModelRun:
    kind: ForecasterKind
    with_events: bool
    model: Forecaster
    report: EvalReport
    train_report: object = None


def select_inputs(frame: TimeSeriesFrame, with_events: bool) -> TimeSeriesFrame:
    return frame if with_events else frame.without_observed()


def fit_model(kind, frame: TimeSeriesFrame, split, with_events: bool = False,
              config: TrainConfig | None = None, window: WindowSpec | None = None,
              **options) -> Forecaster:
    """Scale on the training side of ``split``, window it and fit ``kind``."""
    kind = ForecasterKind(kind)
    inputs = select_inputs(frame, with_events)
    train_raw, _ = split_train_test(inputs, split)
    scaler = fit_scaler(train_raw)
    spec = window or default_window(kind, with_events)
    ds = make_windows(apply_scaler(train_raw, scaler), spec)
    model = create_model(kind, spec, inputs.observed_names, config, **options)
    model.fit(ds)
    return model


def run_one(kind, with_events, frame, split, config, window=None) -> ModelRun:
    model = fit_model(kind, frame, split, with_events, config, window)
    report = evaluate(model, select_inputs(frame, with_events), split)
    logger.info("%s (%s): mse %.4f", kind.value, report.data, report.mse)
    return ModelRun(ForecasterKind(kind), with_events, model, report,
                    getattr(model, "last_report", None))


def _lookup(table):
    if table is None:
        return lambda kind, with_events: None
    if callable(table):
        return table
    return lambda kind, with_events: table.get((kind, with_events))


def run_comparison(frame: TimeSeriesFrame, split, configs, plan=COMPARISON_PLAN,
                   threads: int = 1, windows=None) -> tuple[ComparisonTable, list[ModelRun]]:
    """Train and score every ``(kind, with_events)`` row of ``plan``.

    ``configs`` maps ``(kind, with_events)`` to a :class:`TrainConfig` (or is a
    callable doing so); ``windows`` likewise overrides the default window per
    row.  Rows are independent, so with ``threads > 1`` they run in a thread
    pool; results keep ``plan`` order either way.
    """
    config_of, window_of = _lookup(configs), _lookup(windows)
    jobs = [(ForecasterKind(k), e) for k, e in plan]

    def job(row):
        kind, with_events = row
        return run_one(kind, with_events, frame, split, config_of(kind, with_events),
                       window_of(kind, with_events))

    if threads <= 1:
        runs = [job(row) for row in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(job, jobs))
    return compare_models([r.report for r in runs]), runs
