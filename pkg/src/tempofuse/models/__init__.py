"""The five forecasters behind one fit / forecast interface."""

from __future__ import annotations

from tempofuse.data.windows import WindowSpec
from tempofuse.models.autoregressive import ARParams, AutoregressiveModel, fit_ar
from tempofuse.models.base import (Forecaster, ForecasterKind, ForecastResult, forecast,
                                   predict)
from tempofuse.models.linear import LinearRegressionModel
from tempofuse.models.neural import NeuralForecaster, Seq2Seq, Seq2SeqAttention
from tempofuse.models.tft import TemporalFusionTransformer, TFTInterpretation
from tempofuse.training.config import TrainConfig

MODEL_CLASSES = {
    ForecasterKind.LINEAR_REGRESSION: LinearRegressionModel,
    ForecasterKind.AUTOREGRESSIVE: AutoregressiveModel,
    ForecasterKind.SEQ2SEQ: Seq2Seq,
    ForecasterKind.SEQ2SEQ_ATTENTION: Seq2SeqAttention,
    ForecasterKind.TFT: TemporalFusionTransformer,
}

# Window sizes per model (n_lag, n_look_ahead without events, with events)
DEFAULT_WINDOWS = {
    ForecasterKind.LINEAR_REGRESSION: (10, 124, 16),
    ForecasterKind.AUTOREGRESSIVE: (96, 124, 16),
    ForecasterKind.SEQ2SEQ: (10, 124, 16),
    ForecasterKind.SEQ2SEQ_ATTENTION: (10, 124, 16),
    ForecasterKind.TFT: (6, 124, 16),
}


def default_window(kind: ForecasterKind | str, with_events: bool) -> WindowSpec:
    lag, slow, fast = DEFAULT_WINDOWS[ForecasterKind(kind)]
    return WindowSpec(lag, fast if with_events else slow)


def create_model(kind: ForecasterKind | str, spec: WindowSpec,
                 observed_names: tuple[str, ...] = (), config: TrainConfig | dict | None = None,
                 **options) -> Forecaster:
    """Build an untrained forecaster of ``kind``.

    ``config`` configures the neural models; ``options`` carries model
    specific settings (``ridge``/``use_calendar`` for linear regression,
    ``static_vocab`` for the TFT).
    """
    kind = ForecasterKind(kind)
    cls = MODEL_CLASSES[kind]
    if issubclass(cls, NeuralForecaster):
        if isinstance(config, dict):
            config = TrainConfig.from_dict(config)
        return cls(spec, config or TrainConfig(), observed_names, **options)
    return cls(spec, observed_names, **options)


def build_seq2seq(spec, config=None, observed_names=()) -> Seq2Seq:
    return create_model(ForecasterKind.SEQ2SEQ, spec, observed_names, config)


def build_seq2seq_attention(spec, config=None, observed_names=()) -> Seq2SeqAttention:
    return create_model(ForecasterKind.SEQ2SEQ_ATTENTION, spec, observed_names, config)


def build_tft(spec, config=None, observed_names=(), static_vocab=()) -> TemporalFusionTransformer:
    return create_model(ForecasterKind.TFT, spec, observed_names, config,
                        static_vocab=static_vocab)


def fit_linear(dataset, ridge: float = 1e-6, use_calendar: bool = True) -> LinearRegressionModel:
    model = LinearRegressionModel(dataset.spec, dataset.observed_names, ridge, use_calendar)
    model.fit(dataset)
    return model


def model_options(model: Forecaster) -> dict:
    """Constructor keywords that rebuild ``model`` through :func:`create_model`."""
    if isinstance(model, LinearRegressionModel):
        return {"ridge": model.ridge, "use_calendar": model.use_calendar}
    if isinstance(model, TemporalFusionTransformer):
        return {"config": model.config.to_dict(), "static_vocab": list(model.static_vocab)}
    if isinstance(model, NeuralForecaster):
        return {"config": model.config.to_dict()}
    return {}


__all__ = [
    "ARParams", "AutoregressiveModel", "fit_ar", "Forecaster", "ForecasterKind",
    "ForecastResult", "forecast", "predict", "LinearRegressionModel", "NeuralForecaster",
    "Seq2Seq", "Seq2SeqAttention", "TemporalFusionTransformer", "TFTInterpretation",
    "MODEL_CLASSES", "DEFAULT_WINDOWS", "default_window", "create_model", "build_seq2seq",
    "build_seq2seq_attention", "build_tft", "fit_linear", "model_options",
]
