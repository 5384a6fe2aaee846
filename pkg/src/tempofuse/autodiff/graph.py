"""Tape-based reverse-mode automatic differentiation over float64 arrays.

A :class:`Graph` is an append-only record of operations.  Every node keeps the
name of the op that produced it, the ids of its inputs (always smaller than its
own id, so the tape is acyclic by construction) and its cached forward value.
Values are C-contiguous ``numpy.float64`` arrays of rank 1 to 3; scalars are
represented with shape ``(1,)``.

Trainable state lives in :class:`Parameter` objects that outlive any single
graph.  Binding a parameter into a graph creates a leaf node flagged trainable;
:meth:`Graph.backward` returns one gradient array per bound parameter.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from tempofuse.errors import ShapeError

MAX_RANK = 3


class Parameter:
    """A trainable array, shared by every graph that binds it."""

    __slots__ = ("value", "name")

    def __init__(self, value, name: str = ""):
        self.value = np.array(value, dtype=np.float64, order="C", ndmin=1)
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.value.shape})"


@dataclass(frozen=True)
class Op:
    name: str
    forward: Callable[..., np.ndarray]
    # backward(grad, out, *input_values, **attrs) -> one gradient (or None) per input
    backward: Callable[..., tuple]


OPS: dict[str, Op] = {}


def _register(name, forward, backward):
    OPS[name] = Op(name, forward, backward)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _norm_axis(axis: int, ndim: int) -> int:
    return axis + ndim if axis < 0 else axis


# elementwise arithmetic with numpy broadcasting

_register("add", lambda a, b: a + b,
          lambda g, out, a, b: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))
_register("sub", lambda a, b: a - b,
          lambda g, out, a, b: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))
_register("mul", lambda a, b: a * b,
          lambda g, out, a, b: (_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)))


def _matmul_backward(g, out, a, b):
    if a.ndim == 1:
        return g @ b.T, np.outer(a, g)
    ga = g @ np.swapaxes(b, -1, -2)
    gb = np.swapaxes(a, -1, -2) @ g
    return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)


_register("matmul", np.matmul, _matmul_backward)


def _concat_backward(g, out, *xs, axis):
    cuts = np.cumsum([x.shape[axis] for x in xs])[:-1]
    return tuple(np.split(g, cuts, axis=axis))


_register("concat", lambda *xs, axis: np.concatenate(xs, axis=axis), _concat_backward)


def _stack_backward(g, out, *xs, axis):
    return tuple(np.take(g, i, axis=axis) for i in range(len(xs)))


_register("stack", lambda *xs, axis: np.stack(xs, axis=axis), _stack_backward)


def _getitem_backward(g, out, x, *, key):
    grad = np.zeros_like(x)
    grad[key] += g
    return (grad,)


_register("getitem", lambda x, *, key: np.ascontiguousarray(x[key]), _getitem_backward)


def _take_backward(g, out, x, *, indices):
    grad = np.zeros_like(x)
    np.add.at(grad, indices, g)
    return (grad,)


_register("take", lambda x, *, indices: x[indices], _take_backward)


def _sum_forward(x, *, axis, keepdims):
    if axis is None:
        return np.array([x.sum()])
    return x.sum(axis=axis, keepdims=keepdims)


def _sum_backward(g, out, x, *, axis, keepdims):
    if axis is None:
        return (np.full_like(x, g[0]),)
    if not keepdims:
        g = np.expand_dims(g, axis)
    return (np.broadcast_to(g, x.shape).copy(),)


_register("sum", _sum_forward, _sum_backward)


def _mean_forward(x, *, axis, keepdims):
    if axis is None:
        return np.array([x.mean()])
    return x.mean(axis=axis, keepdims=keepdims)


def _mean_backward(g, out, x, *, axis, keepdims):
    count = x.size if axis is None else x.shape[axis]
    (grad,) = _sum_backward(g, out, x, axis=axis, keepdims=keepdims)
    return (grad / count,)


_register("mean", _mean_forward, _mean_backward)

# tanh form keeps sigmoid(0) == 0.5 exactly and never overflows
_register("sigmoid", lambda x: 0.5 * (1.0 + np.tanh(0.5 * x)),
          lambda g, out, x: (g * out * (1.0 - out),))
_register("tanh", np.tanh, lambda g, out, x: (g * (1.0 - out * out),))
_register("elu", lambda x: np.where(x > 0, x, np.expm1(np.minimum(x, 0.0))),
          lambda g, out, x: (g * np.where(x > 0, 1.0, out + 1.0),))
_register("relu", lambda x: np.maximum(x, 0.0), lambda g, out, x: (g * (x > 0),))


def _softmax_forward(x, *, axis, mask):
    z = x if mask is None else np.where(mask, x, -np.inf)
    peak = z.max(axis=axis, keepdims=True)
    if not np.all(np.isfinite(peak)):
        raise ShapeError("softmax: a row is fully masked")
    e = np.exp(z - peak)
    return e / e.sum(axis=axis, keepdims=True)


def _softmax_backward(g, out, x, *, axis, mask):
    return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)


_register("softmax", _softmax_forward, _softmax_backward)


def _layer_norm_forward(x, *, eps):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps)


def _layer_norm_backward(g, out, x, *, eps):
    sigma = np.sqrt(x.var(axis=-1, keepdims=True) + eps)
    gm = g.mean(axis=-1, keepdims=True)
    gx = (g * out).mean(axis=-1, keepdims=True)
    return ((g - gm - out * gx) / sigma,)


_register("layer_norm", _layer_norm_forward, _layer_norm_backward)


def _transpose_backward(g, out, x, *, axes):
    return (np.transpose(g, np.argsort(axes)),)


_register("transpose", lambda x, *, axes: np.ascontiguousarray(np.transpose(x, axes)),
          _transpose_backward)
_register("reshape", lambda x, *, shape: x.reshape(shape),
          lambda g, out, x, *, shape: (g.reshape(x.shape),))


class Node:
    """Handle to one tape entry.  Arithmetic operators record new nodes."""

    __slots__ = ("graph", "id", "op", "inputs", "attrs", "value")

    def __init__(self, graph: "Graph", nid: int, op: str, inputs: tuple[int, ...],
                 attrs: dict[str, Any], value: np.ndarray):
        self.graph = graph
        self.id = nid
        self.op = op
        self.inputs = inputs
        self.attrs = attrs
        self.value = value

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def __repr__(self) -> str:
        return f"Node(#{self.id} {self.op} {self.value.shape})"

    def __add__(self, other):
        return self.graph.add(self, other)

    def __radd__(self, other):
        return self.graph.add(other, self)

    def __sub__(self, other):
        return self.graph.sub(self, other)

    def __rsub__(self, other):
        return self.graph.sub(other, self)

    def __mul__(self, other):
        return self.graph.mul(self, other)

    def __rmul__(self, other):
        return self.graph.mul(other, self)

    def __neg__(self):
        return self.graph.mul(self, -1.0)

    def __matmul__(self, other):
        return self.graph.matmul(self, other)

    def __getitem__(self, key):
        return self.graph.getitem(self, key)


class Graph:
    """Append-only operation tape.

    Parameters
    ----------
    training : bool
        Enables dropout masks drawn from ``rng``.
    rng : numpy.random.Generator, optional
        Source of dropout masks; required when ``training`` is true and any
        dropout rate is positive.
    """

    def __init__(self, training: bool = False, rng: np.random.Generator | None = None):
        self.nodes: list[Node] = []
        self.training = training
        self.rng = rng
        self._bound: dict[int, tuple[Parameter, int]] = {}
        self.grads: list[np.ndarray | None] | None = None

    # leaves

    def _leaf(self, op: str, value) -> Node:
        value = np.array(value, dtype=np.float64, order="C", ndmin=1)
        self._check_value(op, value)
        node = Node(self, len(self.nodes), op, (), {}, value)
        self.nodes.append(node)
        return node

    def constant(self, value) -> Node:
        return self._leaf("const", value)

    def param(self, parameter: Parameter | np.ndarray) -> Node:
        """Bind ``parameter`` as a trainable leaf (once per graph)."""
        if not isinstance(parameter, Parameter):
            parameter = Parameter(parameter)
        bound = self._bound.get(id(parameter))
        if bound is not None:
            return self.nodes[bound[1]]
        node = self._leaf("param", parameter.value)
        self._bound[id(parameter)] = (parameter, node.id)
        return node

    @property
    def parameters(self) -> list[Parameter]:
        return [p for p, _ in self._bound.values()]

    def node_of(self, parameter: Parameter) -> Node:
        return self.nodes[self._bound[id(parameter)][1]]

    # recording

    @staticmethod
    def _check_value(op: str, value: np.ndarray) -> None:
        if value.ndim == 0 or value.ndim > MAX_RANK or value.size == 0:
            raise ShapeError(f"{op}: result shape {value.shape} outside rank 1..{MAX_RANK} "
                             "with positive extents")

    def _as_node(self, x) -> Node:
        if isinstance(x, Node):
            if x.graph is not self:
                raise ValueError("node belongs to a different graph")
            return x
        return self.constant(x)

    def _apply(self, op: str, inputs: Sequence[Node], **attrs) -> Node:
        value = OPS[op].forward(*(n.value for n in inputs), **attrs)
        value = np.asarray(value, dtype=np.float64)
        self._check_value(op, value)
        node = Node(self, len(self.nodes), op, tuple(n.id for n in inputs), attrs, value)
        self.nodes.append(node)
        return node

    def _broadcast_pair(self, op: str, a, b) -> tuple[Node, Node]:
        a, b = self._as_node(a), self._as_node(b)
        try:
            np.broadcast_shapes(a.shape, b.shape)
        except ValueError:
            raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None
        return a, b

    def add(self, a, b) -> Node:
        return self._apply("add", self._broadcast_pair("add", a, b))

    def sub(self, a, b) -> Node:
        return self._apply("sub", self._broadcast_pair("sub", a, b))

    def mul(self, a, b) -> Node:
        return self._apply("mul", self._broadcast_pair("mul", a, b))

    def matmul(self, a, b) -> Node:
        a, b = self._as_node(a), self._as_node(b)
        ok = b.ndim >= 2 and a.shape[-1] == b.shape[-2] and (a.ndim > 1 or b.ndim == 2)
        if ok and a.ndim > 1:
            try:
                np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
            except ValueError:
                ok = False
        if not ok:
            raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
        return self._apply("matmul", (a, b))

    def concat(self, xs: Iterable, axis: int = -1) -> Node:
        xs = [self._as_node(x) for x in xs]
        if not xs:
            raise ShapeError("concat: no inputs")
        ndim = xs[0].ndim
        ax = _norm_axis(axis, ndim)
        for x in xs[1:]:
            if x.ndim != ndim or any(s != t for i, (s, t) in enumerate(zip(x.shape, xs[0].shape))
                                     if i != ax):
                raise ShapeError(f"concat: incompatible shapes {xs[0].shape} and {x.shape} "
                                 f"on axis {axis}")
        return self._apply("concat", xs, axis=ax)

    def stack(self, xs: Iterable, axis: int = 0) -> Node:
        xs = [self._as_node(x) for x in xs]
        if not xs:
            raise ShapeError("stack: no inputs")
        for x in xs[1:]:
            if x.shape != xs[0].shape:
                raise ShapeError(f"stack: incompatible shapes {xs[0].shape} and {x.shape}")
        return self._apply("stack", xs, axis=_norm_axis(axis, xs[0].ndim + 1))

    def getitem(self, x, key) -> Node:
        """Basic (slice/int) indexing; the result must keep rank >= 1."""
        x = self._as_node(x)
        keys = key if isinstance(key, tuple) else (key,)
        if not all(isinstance(k, (int, np.integer, slice)) or k is Ellipsis for k in keys):
            raise TypeError("getitem supports only ints, slices and Ellipsis; use take()")
        return self._apply("getitem", (x,), key=key)

    def slice(self, x, start: int, stop: int, axis: int = -1) -> Node:
        x = self._as_node(x)
        ax = _norm_axis(axis, x.ndim)
        key = (slice(None),) * ax + (slice(start, stop),)
        return self.getitem(x, key)

    def take(self, x, indices) -> Node:
        """Gather rows of ``x`` along axis 0 with an integer index array."""
        x = self._as_node(x)
        indices = np.asarray(indices)
        if indices.dtype.kind not in "iu":
            raise TypeError("take: indices must be integers")
        if indices.size and (indices.min() < 0 or indices.max() >= x.shape[0]):
            raise IndexError(f"take: index out of range for axis of size {x.shape[0]}")
        return self._apply("take", (x,), indices=indices)

    def sum(self, x, axis: int | None = None, keepdims: bool = False) -> Node:
        x = self._as_node(x)
        return self._apply("sum", (x,), axis=None if axis is None else _norm_axis(axis, x.ndim),
                           keepdims=keepdims)

    def mean(self, x, axis: int | None = None, keepdims: bool = False) -> Node:
        x = self._as_node(x)
        return self._apply("mean", (x,), axis=None if axis is None else _norm_axis(axis, x.ndim),
                           keepdims=keepdims)

    def sigmoid(self, x) -> Node:
        return self._apply("sigmoid", (self._as_node(x),))

    def tanh(self, x) -> Node:
        return self._apply("tanh", (self._as_node(x),))

    def elu(self, x) -> Node:
        return self._apply("elu", (self._as_node(x),))

    def relu(self, x) -> Node:
        return self._apply("relu", (self._as_node(x),))

    def softmax(self, x, axis: int = -1, mask: np.ndarray | None = None) -> Node:
        """Softmax along ``axis``; entries where ``mask`` is False get exactly 0."""
        x = self._as_node(x)
        ax = _norm_axis(axis, x.ndim)
        if x.shape[ax] == 0:
            raise ShapeError("softmax: empty axis")
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
            try:
                np.broadcast_shapes(mask.shape, x.shape)
            except ValueError:
                raise ShapeError(f"softmax: mask shape {mask.shape} incompatible with "
                                 f"{x.shape}") from None
        return self._apply("softmax", (x,), axis=ax, mask=mask)

    def layer_norm(self, x, eps: float = 1e-5) -> Node:
        """Normalize over the last axis (no affine part)."""
        return self._apply("layer_norm", (self._as_node(x),), eps=eps)

    def transpose(self, x, axes: Sequence[int] | None = None) -> Node:
        x = self._as_node(x)
        if axes is None:
            axes = tuple(range(x.ndim - 2)) + (x.ndim - 1, x.ndim - 2)
        axes = tuple(axes)
        if sorted(axes) != list(range(x.ndim)):
            raise ShapeError(f"transpose: axes {axes} invalid for shape {x.shape}")
        return self._apply("transpose", (x,), axes=axes)

    def reshape(self, x, shape: Sequence[int]) -> Node:
        x = self._as_node(x)
        shape = tuple(int(s) for s in shape)
        if int(np.prod(shape)) != x.value.size:
            raise ShapeError(f"reshape: cannot view {x.shape} as {shape}")
        return self._apply("reshape", (x,), shape=shape)

    def dropout(self, x, rate: float) -> Node:
        """Inverted dropout; identity outside training or at rate 0."""
        x = self._as_node(x)
        if not self.training or rate <= 0.0:
            return x
        if self.rng is None:
            raise ValueError("dropout in training mode needs a graph rng")
        keep = (self.rng.random(x.shape) >= rate) / (1.0 - rate)
        return self.mul(x, keep)

    # differentiation

    def backward(self, loss: Node) -> dict[Parameter, np.ndarray]:
        """Propagate d(loss)/d(node) back through the tape.

        Returns the gradient for every bound parameter; parameters that do not
        reach ``loss`` receive zeros.  Gradients of leaf nodes stay available
        in ``self.grads`` until the next call.
        """
        loss = self._as_node(loss)
        if loss.shape != (1,):
            raise ShapeError(f"backward: loss must have shape (1,), got {loss.shape}")
        grads: list[np.ndarray | None] = [None] * len(self.nodes)
        grads[loss.id] = np.ones(1)
        nodes = self.nodes
        for nid in range(loss.id, -1, -1):
            g = grads[nid]
            node = nodes[nid]
            if g is None or not node.inputs:
                continue
            inputs = [nodes[i].value for i in node.inputs]
            for i, gi in zip(node.inputs, OPS[node.op].backward(g, node.value, *inputs,
                                                                 **node.attrs)):
                if gi is None:
                    continue
                grads[i] = gi if grads[i] is None else grads[i] + gi
            # interior gradients are consumed exactly once; keep only leaves
            grads[nid] = None
        self.grads = grads
        out = {}
        for parameter, nid in self._bound.values():
            g = grads[nid]
            out[parameter] = np.zeros_like(parameter.value) if g is None else g
        return out

    def replay(self, target: Node, overrides: dict[int, np.ndarray]) -> np.ndarray:
        """Recompute ``target`` with some leaf values replaced.

        Only nodes downstream of an overridden leaf are re-evaluated; cached
        values are left untouched.
        """
        if not overrides:
            return target.value
        values: dict[int, np.ndarray] = {}
        for node in self.nodes[min(overrides):target.id + 1]:
            if node.id in overrides:
                values[node.id] = np.asarray(overrides[node.id], dtype=np.float64)
            elif node.inputs and any(i in values for i in node.inputs):
                ins = [values[i] if i in values else self.nodes[i].value for i in node.inputs]
                values[node.id] = OPS[node.op].forward(*ins, **node.attrs)
        return values.get(target.id, target.value)
