"""Temporal fusion transformer for multi-horizon quantile forecasts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tempofuse.autodiff import Graph, Node
from tempofuse.data.windows import WindowedDataset, WindowSpec
from tempofuse.errors import ShapeError
from tempofuse.layers import (CALENDAR_VOCAB, Dense, Embedding, GatedResidualNetwork,
                              GatedSkip, InterpretableMultiHeadAttention, LSTMCell, Module,
                              QuantileHead, VariableSelection, causal_mask)
from tempofuse.models.base import ForecasterKind
from tempofuse.models.neural import CalendarEmbeddings, NeuralForecaster
from tempofuse.training.config import TrainConfig
from tempofuse.training.losses import pinball_loss


@dataclass
class TFTInterpretation:
    """Arrays captured during one forward pass.

    past_weights    (n, p, past variables)
    future_weights  (n, tau, future variables)
    attention       (n, tau, p + tau), head-averaged
    static_weights  (n, static variables) or None
    """

    past_weights: np.ndarray
    future_weights: np.ndarray
    attention: np.ndarray
    static_weights: np.ndarray | None = None


class StaticCovariateEncoder(Module):
    """Selects static variables and derives the four context vectors."""

    def __init__(self, vocab_sizes, dim: int, rng: np.random.Generator, dropout: float):
        self.embeddings = [Embedding(v, dim, rng) for v in vocab_sizes]
        self.selection = VariableSelection(len(vocab_sizes), dim, dim, rng, dropout=dropout)
        # selection context, enrichment context, LSTM initial hidden and cell state
        self.contexts = [GatedResidualNetwork(dim, dim, rng, dropout=dropout) for _ in range(4)]


class TemporalFusionTransformer(NeuralForecaster):
    """Variable selection, LSTM locality, static enrichment, causal attention.

    Past variables are the target, each observed column and the four
    calendar features; future-known variables are the calendar features.
    ``static_vocab`` lists vocabulary sizes of optional categorical static
    covariates; with none, the contexts are absent and the LSTM starts at 0.
    """

    kind = ForecasterKind.TFT
    inference_batch = 64

    def __init__(self, spec: WindowSpec, config: TrainConfig,
                 observed_names: tuple[str, ...] = (), static_vocab: tuple[int, ...] = ()):
        super().__init__(spec, config, observed_names)
        rng = np.random.default_rng(config.seed)
        d, rate = config.hidden_dim, config.dropout_rate
        self.static_vocab = tuple(int(v) for v in static_vocab)
        ctx = d if self.static_vocab else None
        self.target_projection = Dense(1, d, rng)
        self.observed_projections = [Dense(1, d, rng) for _ in self.observed_names]
        self.calendar = CalendarEmbeddings(d, rng)
        self.static_encoder = (StaticCovariateEncoder(self.static_vocab, d, rng, rate)
                               if self.static_vocab else None)
        self.past_selection = VariableSelection(len(self.past_variables), d, d, rng,
                                                context_dim=ctx, dropout=rate)
        self.future_selection = VariableSelection(len(self.future_variables), d, d, rng,
                                                  context_dim=ctx, dropout=rate)
        self.encoder = LSTMCell(d, d, rng)
        self.decoder = LSTMCell(d, d, rng)
        self.lstm_gate = GatedSkip(d, d, rng, rate)
        self.enrichment = GatedResidualNetwork(d, d, rng, context_dim=ctx, dropout=rate)
        self.attention = InterpretableMultiHeadAttention(d, config.attention_heads, rng, rate)
        self.attention_gate = GatedSkip(d, d, rng, rate)
        self.feedforward = GatedResidualNetwork(d, d, rng, dropout=rate)
        self.output_gate = GatedSkip(d, d, rng)
        self.head = QuantileHead(d, spec.n_look_ahead, config.quantile_levels, rng)
        self.interpretation: TFTInterpretation | None = None

    @property
    def quantile_levels(self) -> tuple[float, ...]:
        return self.config.quantile_levels

    @property
    def past_variables(self) -> tuple[str, ...]:
        return ("dep_demand",) + self.observed_names + tuple(CALENDAR_VOCAB)

    @property
    def future_variables(self) -> tuple[str, ...]:
        return tuple(CALENDAR_VOCAB)

    def _static_contexts(self, g: Graph, static: np.ndarray | None, batch: int):
        if self.static_encoder is None:
            if static is not None:
                raise ShapeError("tft: static input given to a model built without statics")
            return None, None, None, None, None
        if static is None or np.shape(static) != (batch, len(self.static_vocab)):
            raise ShapeError(f"tft: static input must have shape {(batch, len(self.static_vocab))}")
        enc = self.static_encoder
        static = np.asarray(static)
        embs = [e(g, static[:, j]) for j, e in enumerate(enc.embeddings)]
        combined, weights = enc.selection(g, embs)
        c_sel, c_enrich, c_h, c_c = (grn(g, combined) for grn in enc.contexts)
        return c_sel, c_enrich, c_h, c_c, weights

    def outputs(self, g: Graph, ds: WindowedDataset, teacher_forcing: bool = False,
                static: np.ndarray | None = None) -> Node:
        p, tau = self.spec.n_lag, self.spec.n_look_ahead
        rate = self.config.dropout_rate
        batch = len(ds)
        c_sel, c_enrich, c_h, c_c, static_w = self._static_contexts(g, static, batch)

        past = [self.target_projection(g, g.constant(ds.past_y[..., None]))]
        for j, proj in enumerate(self.observed_projections):
            past.append(proj(g, g.constant(ds.past_observed[..., j:j + 1])))
        past += self.calendar(g, ds.past_calendar)
        future = self.calendar(g, ds.future_calendar)
        past_x, past_w = self.past_selection(g, past, c_sel)
        future_x, future_w = self.future_selection(g, future, c_sel)

        if c_h is None:
            h, c = self.encoder.zero_state(g, (batch,))
        else:
            h, c = c_h, c_c
        states = []
        for t in range(p):
            h, c = self.encoder(g, past_x[:, t], h, c)
            states.append(h)
        for t in range(tau):
            h, c = self.decoder(g, future_x[:, t], h, c)
            states.append(h)
        local = g.stack(states, axis=1)
        selected = g.concat([past_x, future_x], axis=1)
        temporal = self.lstm_gate(g, local, selected)

        enriched = self.enrichment(g, temporal, c_enrich)
        queries = g.slice(enriched, p, p + tau, axis=1)
        attended, attn = self.attention(g, queries, enriched, causal_mask(tau, p + tau))
        gated = self.attention_gate(g, attended, queries)
        decoded = self.output_gate(g, self.feedforward(g, gated),
                                   g.slice(temporal, p, p + tau, axis=1))
        self.interpretation = TFTInterpretation(
            past_w.value, future_w.value, attn.value,
            None if static_w is None else static_w.value)
        return self.head(g, decoded)

    def loss(self, g: Graph, ds: WindowedDataset, static: np.ndarray | None = None) -> Node:
        return pinball_loss(self.outputs(g, ds, static=static), ds.labels, self.quantile_levels)

    def interpret(self, ds: WindowedDataset) -> TFTInterpretation:
        """Selection weights and attention over every sample of ``ds``."""
        self.check_dataset(ds)
        parts = []
        for lo in range(0, len(ds), self.inference_batch):
            self.outputs(Graph(), ds.subset(slice(lo, lo + self.inference_batch)))
            parts.append(self.interpretation)
        return TFTInterpretation(
            np.concatenate([x.past_weights for x in parts]),
            np.concatenate([x.future_weights for x in parts]),
            np.concatenate([x.attention for x in parts]))
