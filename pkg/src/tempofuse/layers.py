"""Neural building blocks expressed on the autodiff tape.

Every block owns :class:`~tempofuse.autodiff.Parameter` objects and is called
with the graph it should record into, e.g. ``dense(g, x)``.  Inputs may carry
any number of leading batch/time axes; the last axis is the feature axis.
"""

from __future__ import annotations

import math
from typing import Iterator, Sequence

import numpy as np

from tempofuse.autodiff import Graph, Node, Parameter
from tempofuse.errors import ShapeError

# vocabulary sizes of the calendar features (hour, quarter, day of week, month)
CALENDAR_VOCAB = {"hour": 24, "qtr": 4, "day_of_week": 7, "month": 12}


def init_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Module:
    """Parameter discovery over attributes, in definition order."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        seen: set[int] = set()
        for name, p in self._walk(prefix):
            if id(p) not in seen:
                seen.add(id(p))
                yield name, p

    def _walk(self, prefix):
        for name, value in vars(self).items():
            items = list(enumerate(value)) if isinstance(value, (list, tuple)) else [(None, value)]
            for i, item in items:
                key = f"{prefix}{name}" if i is None else f"{prefix}{name}.{i}"
                if isinstance(item, Parameter):
                    yield key, item
                elif isinstance(item, Module):
                    yield from item._walk(key + ".")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]


class Dense(Module):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, bias: bool = True):
        self.in_dim, self.out_dim = in_dim, out_dim
        self.weight = Parameter(init_uniform(rng, (in_dim, out_dim), in_dim))
        self.bias = Parameter(init_uniform(rng, (out_dim,), in_dim)) if bias else None

    def __call__(self, g: Graph, x: Node) -> Node:
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"dense: input feature size {x.shape[-1]} != {self.in_dim}")
        out = x @ g.param(self.weight)
        return out + g.param(self.bias) if self.bias is not None else out


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        self.eps = eps
        self.gain = Parameter(np.ones(dim))
        self.shift = Parameter(np.zeros(dim))

    def __call__(self, g: Graph, x: Node) -> Node:
        return g.layer_norm(x, self.eps) * g.param(self.gain) + g.param(self.shift)


class Embedding(Module):
    def __init__(self, vocabulary_size: int, dim: int, rng: np.random.Generator):
        self.vocabulary_size, self.dim = vocabulary_size, dim
        self.weight = Parameter(init_uniform(rng, (vocabulary_size, dim), 1))

    def __call__(self, g: Graph, index) -> Node:
        index = np.asarray(index)
        if index.dtype.kind not in "iu":
            raise TypeError("embedding indices must be integers")
        if index.size and (index.min() < 0 or index.max() >= self.vocabulary_size):
            bad = index[(index < 0) | (index >= self.vocabulary_size)].ravel()[0]
            raise IndexError(f"embedding index {bad} outside vocabulary "
                             f"[0, {self.vocabulary_size})")
        return g.take(g.param(self.weight), index)


class LSTMCell(Module):
    """Single LSTM step with gate blocks ordered input, forget, output, candidate."""

    def __init__(self, input_dim: int, hidden_dim: int, rng: np.random.Generator):
        self.input_dim, self.hidden_dim = input_dim, hidden_dim
        fan_in = input_dim + hidden_dim
        self.weight = Parameter(init_uniform(rng, (fan_in, 4 * hidden_dim), hidden_dim))
        self.bias = Parameter(init_uniform(rng, (4 * hidden_dim,), hidden_dim))

    def __call__(self, g: Graph, x: Node, h: Node, c: Node) -> tuple[Node, Node]:
        if x.shape[-1] != self.input_dim or h.shape[-1] != self.hidden_dim \
                or c.shape != h.shape:
            raise ShapeError(f"lstm_step: shapes x{x.shape} h{h.shape} c{c.shape} do not match "
                             f"cell ({self.input_dim} -> {self.hidden_dim})")
        n = self.hidden_dim
        z = g.concat([x, h], axis=-1) @ g.param(self.weight) + g.param(self.bias)
        i = g.sigmoid(g.slice(z, 0, n))
        f = g.sigmoid(g.slice(z, n, 2 * n))
        o = g.sigmoid(g.slice(z, 2 * n, 3 * n))
        cand = g.tanh(g.slice(z, 3 * n, 4 * n))
        c_next = f * c + i * cand
        return o * g.tanh(c_next), c_next

    def zero_state(self, g: Graph, batch_shape: tuple[int, ...] = ()) -> tuple[Node, Node]:
        zeros = np.zeros(batch_shape + (self.hidden_dim,))
        return g.constant(zeros), g.constant(zeros)


class LuongAttention(Module):
    """Luong "general" score: ``h_dec^T W h_enc``."""

    def __init__(self, hidden_dim: int, rng: np.random.Generator):
        self.hidden_dim = hidden_dim
        self.weight = Parameter(init_uniform(rng, (hidden_dim, hidden_dim), hidden_dim))

    def __call__(self, g: Graph, decoder_h: Node, encoder_hs: Node) -> tuple[Node, Node]:
        """Return ``(context [..., hidden], weights [..., p])``."""
        if encoder_hs.ndim < 2 or encoder_hs.shape[-2] == 0:
            raise ShapeError("luong_attention: empty encoder sequence")
        lead = decoder_h.shape[:-1]
        p, n = encoder_hs.shape[-2], self.hidden_dim
        query = g.reshape(decoder_h @ g.param(self.weight), lead + (n, 1))
        scores = g.reshape(encoder_hs @ query, lead + (p,))
        weights = g.softmax(scores, axis=-1)
        context = g.reshape(g.reshape(weights, lead + (1, p)) @ encoder_hs, lead + (n,))
        return context, weights


class GLU(Module):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        self.gate = Dense(in_dim, out_dim, rng)
        self.linear = Dense(in_dim, out_dim, rng)

    def __call__(self, g: Graph, x: Node) -> Node:
        return g.sigmoid(self.gate(g, x)) * self.linear(g, x)


class GatedSkip(Module):
    """``LayerNorm(residual + GLU(x))``."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator,
                 dropout: float = 0.0):
        self.glu = GLU(in_dim, out_dim, rng)
        self.norm = LayerNorm(out_dim)
        self.dropout = dropout

    def __call__(self, g: Graph, x: Node, residual: Node) -> Node:
        return self.norm(g, residual + self.glu(g, g.dropout(x, self.dropout)))


def _align_context(g: Graph, context: Node, target_rank: int) -> Node:
    # [B, k] context against [B, T, k] activations
    while context.ndim < target_rank:
        context = g.reshape(context, context.shape[:1] + (1,) + context.shape[1:])
    return context


class GatedResidualNetwork(Module):
    """``LayerNorm(skip(a) + GLU(dense1(elu(dense2(a) + W_c c))))``.

    ``skip`` is the identity unless ``output_dim`` differs from ``input_dim``.
    """

    def __init__(self, input_dim: int, hidden_dim: int, rng: np.random.Generator,
                 output_dim: int | None = None, context_dim: int | None = None,
                 dropout: float = 0.0):
        output_dim = input_dim if output_dim is None else output_dim
        self.input_dim, self.output_dim = input_dim, output_dim
        self.dense2 = Dense(input_dim, hidden_dim, rng)
        self.context = Dense(context_dim, hidden_dim, rng, bias=False) if context_dim else None
        self.dense1 = Dense(hidden_dim, output_dim, rng)
        self.skip = Dense(input_dim, output_dim, rng) if output_dim != input_dim else None
        self.gate = GatedSkip(output_dim, output_dim, rng, dropout)

    def __call__(self, g: Graph, a: Node, context: Node | None = None) -> Node:
        hidden = self.dense2(g, a)
        if context is not None:
            if self.context is None:
                raise ValueError("grn_forward: context given to a block built without one")
            hidden = hidden + _align_context(g, self.context(g, context), hidden.ndim)
        hidden = self.dense1(g, g.elu(hidden))
        residual = a if self.skip is None else self.skip(g, a)
        return self.gate(g, hidden, residual)


class VariableSelection(Module):
    """Per-variable GRN transforms mixed by softmax selection weights."""

    def __init__(self, num_vars: int, dim: int, hidden_dim: int, rng: np.random.Generator,
                 context_dim: int | None = None, dropout: float = 0.0):
        self.num_vars, self.dim = num_vars, dim
        self.transforms = [GatedResidualNetwork(dim, hidden_dim, rng, dropout=dropout)
                           for _ in range(num_vars)]
        self.selector = GatedResidualNetwork(num_vars * dim, hidden_dim, rng,
                                             output_dim=num_vars, context_dim=context_dim,
                                             dropout=dropout)

    def __call__(self, g: Graph, embeddings: Sequence[Node],
                 context: Node | None = None) -> tuple[Node, Node]:
        """Return ``(combined [..., dim], weights [..., num_vars])``."""
        if len(embeddings) != self.num_vars:
            raise ValueError(f"variable_select: expected {self.num_vars} variables, "
                             f"got {len(embeddings)}")
        flat = embeddings[0] if self.num_vars == 1 else g.concat(embeddings, axis=-1)
        weights = g.softmax(self.selector(g, flat, context), axis=-1)
        combined = None
        for v, (block, emb) in enumerate(zip(self.transforms, embeddings)):
            term = g.slice(weights, v, v + 1) * block(g, emb)
            combined = term if combined is None else combined + term
        return combined, weights


def causal_mask(num_queries: int, num_keys: int) -> np.ndarray:
    """Queries sit at the last ``num_queries`` key positions and may look back only."""
    offset = num_keys - num_queries
    q = np.arange(num_queries)[:, None] + offset
    return np.arange(num_keys)[None, :] <= q


class InterpretableMultiHeadAttention(Module):
    """Scaled dot-product heads sharing one value projection, averaged before output."""

    def __init__(self, dim: int, heads: int, rng: np.random.Generator, dropout: float = 0.0):
        if dim % heads:
            raise ValueError(f"hidden dim {dim} not divisible by {heads} heads")
        self.dim, self.heads, self.head_dim = dim, heads, dim // heads
        self.queries = [Dense(dim, self.head_dim, rng) for _ in range(heads)]
        self.keys = [Dense(dim, self.head_dim, rng) for _ in range(heads)]
        self.value = Dense(dim, self.head_dim, rng)
        self.out = Dense(self.head_dim, dim, rng)
        self.dropout = dropout

    def __call__(self, g: Graph, queries: Node, keys: Node,
                 mask: np.ndarray | None = None) -> tuple[Node, Node]:
        """Return ``(output [..., Tq, dim], head-averaged attention [..., Tq, Tk])``."""
        if mask is not None and not np.all(np.asarray(mask).any(axis=-1)):
            raise ValueError("interpretable_mha: a query row is fully masked")
        values = self.value(g, keys)
        scale = 1.0 / math.sqrt(self.head_dim)
        mixed = attn_sum = None
        for q_proj, k_proj in zip(self.queries, self.keys):
            scores = (q_proj(g, queries) @ g.transpose(k_proj(g, keys))) * scale
            attn = g.softmax(scores, axis=-1, mask=mask)
            head = g.dropout(attn, self.dropout) @ values
            mixed = head if mixed is None else mixed + head
            attn_sum = attn if attn_sum is None else attn_sum + attn
        inv = 1.0 / self.heads
        return self.out(g, mixed * inv), attn_sum * inv


class QuantileHead(Module):
    """Separate affine map per horizon step and quantile level."""

    def __init__(self, dim: int, horizon: int, levels: Sequence[float], rng: np.random.Generator):
        levels = tuple(float(q) for q in levels)
        if not levels or any(not 0.0 < q < 1.0 for q in levels) \
                or any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError(f"quantile levels must be strictly increasing in (0, 1): {levels}")
        self.levels, self.horizon, self.dim = levels, horizon, dim
        self.weight = Parameter(init_uniform(rng, (horizon, dim, len(levels)), dim))
        self.bias = Parameter(init_uniform(rng, (horizon, len(levels)), dim))

    def __call__(self, g: Graph, features: Node) -> Node:
        """``[..., horizon, dim] -> [..., horizon, Q]`` raw (unsorted) outputs."""
        if features.shape[-2:] != (self.horizon, self.dim):
            raise ShapeError(f"quantile_head: features {features.shape} do not end in "
                             f"{(self.horizon, self.dim)}")
        if features.ndim == 2:
            x = g.reshape(features, (self.horizon, 1, self.dim))
            out = g.reshape(x @ g.param(self.weight), (self.horizon, len(self.levels)))
        else:
            x = g.transpose(features, (1, 0, 2))
            out = g.transpose(x @ g.param(self.weight), (1, 0, 2))
        return out + g.param(self.bias)

    @staticmethod
    def sort(values: np.ndarray) -> np.ndarray:
        """Non-crossing enforcement applied at inference."""
        return np.sort(values, axis=-1)
