"""Tape-trained forecasters: shared plumbing plus the two encoder-decoder LSTMs."""

from __future__ import annotations

from abc import abstractmethod

import numpy as np

from tempofuse.autodiff import Graph, Node
from tempofuse.data.frame import CALENDAR_OFFSETS
from tempofuse.data.windows import WindowedDataset, WindowSpec
from tempofuse.layers import (CALENDAR_VOCAB, Dense, Embedding, LSTMCell, LuongAttention,
                              Module)
from tempofuse.models.base import Forecaster, ForecasterKind
from tempofuse.training.config import TrainConfig
from tempofuse.training.losses import mse_loss

INFERENCE_BATCH = 512


class CalendarEmbeddings(Module):
    """One embedding table per calendar feature."""

    def __init__(self, dim: int, rng: np.random.Generator):
        self.tables = [Embedding(v, dim, rng) for v in CALENDAR_VOCAB.values()]

    def __call__(self, g: Graph, calendar: np.ndarray) -> list[Node]:
        idx = calendar - CALENDAR_OFFSETS
        return [table(g, idx[..., j]) for j, table in enumerate(self.tables)]


class NeuralForecaster(Forecaster, Module):
    inference_batch = INFERENCE_BATCH

    def __init__(self, spec: WindowSpec, config: TrainConfig,
                 observed_names: tuple[str, ...] = ()):
        Forecaster.__init__(self, spec, observed_names)
        self.config = config
        self.last_report = None

    @abstractmethod
    def outputs(self, g: Graph, ds: WindowedDataset, teacher_forcing: bool = False) -> Node:
        """Scaled predictions ``[B, n_look_ahead, Q]`` recorded on ``g``."""

    @abstractmethod
    def loss(self, g: Graph, ds: WindowedDataset) -> Node:
        ...

    def _fit(self, ds: WindowedDataset):
        from tempofuse.training.loop import train
        _, report = train(self, ds, self.config)
        self.last_report = report
        return report

    def predict_scaled(self, ds: WindowedDataset) -> np.ndarray:
        chunks = []
        step = self.inference_batch
        for lo in range(0, len(ds), step):
            g = Graph(training=False)
            chunks.append(self.outputs(g, ds.subset(slice(lo, lo + step))).value)
        return np.concatenate(chunks, axis=0)

    def state(self):
        return {name: p.value for name, p in self.named_parameters()}

    def load_state(self, state):
        params = dict(self.named_parameters())
        if set(params) != set(state):
            missing, extra = set(params) - set(state), set(state) - set(params)
            raise ValueError(f"weight names differ: missing {sorted(missing)}, "
                             f"unexpected {sorted(extra)}")
        for name, p in params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.value.shape:
                raise ValueError(f"weight {name}: shape {value.shape} != {p.value.shape}")
            p.value = value


def _past_inputs(g: Graph, ds: WindowedDataset, embed: CalendarEmbeddings) -> Node:
    numeric = np.concatenate([ds.past_y[..., None], ds.past_observed], axis=-1)
    return g.concat([g.constant(numeric)] + embed(g, ds.past_calendar), axis=-1)


class Seq2Seq(NeuralForecaster):
    """LSTM encoder over the past block and LSTM decoder over the horizon.

    The decoder consumes the future calendar embeddings and the previous
    step's output: the true label under teacher forcing, its own prediction
    otherwise.  The first step receives the last observed target.
    """

    kind = ForecasterKind.SEQ2SEQ
    uses_attention = False

    def __init__(self, spec: WindowSpec, config: TrainConfig,
                 observed_names: tuple[str, ...] = ()):
        super().__init__(spec, config, observed_names)
        rng = np.random.default_rng(config.seed)
        e, h = config.embedding_dim, config.hidden_dim
        k = len(self.observed_names)
        self.embed = CalendarEmbeddings(e, rng)
        self.encoder = LSTMCell(1 + k + 4 * e, h, rng)
        self.decoder = LSTMCell(4 * e + 1, h, rng)
        self.attention = LuongAttention(h, rng) if self.uses_attention else None
        self.head = Dense(2 * h if self.uses_attention else h, 1, rng)
        self.last_attention: np.ndarray | None = None

    def outputs(self, g: Graph, ds: WindowedDataset, teacher_forcing: bool = False) -> Node:
        p, tau = self.spec.n_lag, self.spec.n_look_ahead
        rate = self.config.dropout_rate
        batch = len(ds)
        enc_in = _past_inputs(g, ds, self.embed)
        h, c = self.encoder.zero_state(g, (batch,))
        enc_hs = []
        for t in range(p):
            h, c = self.encoder(g, enc_in[:, t], h, c)
            enc_hs.append(h)
        memory = g.dropout(g.stack(enc_hs, axis=1), rate) if self.attention else None

        dec_in = g.concat(self.embed(g, ds.future_calendar), axis=-1)
        prev = g.constant(ds.past_y[:, -1:])
        outs, weights = [], []
        for s in range(tau):
            h, c = self.decoder(g, g.concat([dec_in[:, s], prev], axis=-1), h, c)
            feat = h
            if self.attention is not None:
                context, w = self.attention(g, h, memory)
                weights.append(w.value)
                feat = g.concat([h, context], axis=-1)
            out = self.head(g, g.dropout(feat, rate))
            outs.append(out)
            prev = g.constant(ds.labels[:, s:s + 1]) if teacher_forcing else out
        if weights:
            self.last_attention = np.stack(weights, axis=1)     # [B, tau, p]
        return g.stack(outs, axis=1)

    def loss(self, g: Graph, ds: WindowedDataset) -> Node:
        pred = self.outputs(g, ds, teacher_forcing=True)
        return mse_loss(g.reshape(pred, pred.shape[:2]), ds.labels)

    def attention_weights(self, ds: WindowedDataset) -> np.ndarray:
        """Decoder-over-encoder weights ``[n, n_look_ahead, n_lag]``."""
        if self.attention is None:
            raise TypeError("plain seq2seq has no attention weights")
        out = []
        for lo in range(0, len(ds), INFERENCE_BATCH):
            self.outputs(Graph(), ds.subset(slice(lo, lo + INFERENCE_BATCH)))
            out.append(self.last_attention)
        return np.concatenate(out, axis=0)


class Seq2SeqAttention(Seq2Seq):
    """Seq2seq whose head also sees a Luong context over all encoder states."""

    kind = ForecasterKind.SEQ2SEQ_ATTENTION
    uses_attention = True
