"""Metrics, comparison tables, rolling forecasts and TFT interpretability."""

from tempofuse.evaluation.interpret import (AttentionProfile, VariableImportanceReport,
                                            attention_by_lag, variable_importance)
from tempofuse.evaluation.metrics import compute_mae, compute_mse, explained_variance
from tempofuse.evaluation.report import (ComparisonTable, EvalReport, ScoredWindows,
                                         compare_models, evaluate, plot_csv, report_from_scores,
                                         score_windows)
from tempofuse.evaluation.rolling import (RollingForecastTrace, aggregate, aggregated_mae,
                                          issue_window, rolling_forecast)

__all__ = [
    "AttentionProfile", "VariableImportanceReport", "attention_by_lag", "variable_importance",
    "compute_mae", "compute_mse", "explained_variance", "ComparisonTable", "EvalReport",
    "ScoredWindows", "compare_models", "evaluate", "plot_csv", "report_from_scores",
    "score_windows", "RollingForecastTrace", "aggregate", "aggregated_mae", "issue_window",
    "rolling_forecast",
]
