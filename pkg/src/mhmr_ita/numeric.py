"""Dense float64 arrays with reverse-mode differentiation.

A dynamic tape: every operation returns a new :class:`Tensor` holding its
value, its parents, and a closure that routes gradients to those parents.
Graphs are rebuilt each forward pass (sequence lengths vary per context),
and :func:`backward` accumulates gradients into the leaves by walking the
tape in reverse topological order. Everything is 64-bit; there are no hidden
sources of randomness in a forward pass.

Gate layouts: LSTM pre-activations are ordered input/forget/candidate/output;
GRU pre-activations reset/update/candidate with the reset gate applied to the
hidden contribution of the candidate.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import ContractError, DomainError, TrainingError

_node_ids = itertools.count()


class Tensor:
    """A dense float64 array participating in a computation graph."""

    __slots__ = ("data", "grad", "node_id", "parents", "backward_fn", "requires")

    def __init__(self, data, requires: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.node_id = next(_node_ids)
        self.parents: tuple[Tensor, ...] = ()
        self.backward_fn: Optional[Callable[[np.ndarray], None]] = None
        self.requires = requires

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires={self.requires})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self):
        return total_sum(self)

    def mean(self):
        return total_mean(self)

    def reshape(self, shape):
        return reshape(self, shape)


def constant(data) -> Tensor:
    return Tensor(data, requires=False)


def _as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=np.float64))


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    out = Tensor(data)
    if any(p.requires for p in parents):
        out.requires = True
        out.parents = parents
        out.backward_fn = backward_fn
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# -- elementwise and shape operations -----------------------------------------


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def back(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _make(a.data + b.data, (a, b), back)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def back(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(-g, b.data.shape))

    return _make(a.data - b.data, (a, b), back)


def neg(a) -> Tensor:
    a = _as_tensor(a)
    return _make(-a.data, (a,), lambda g: _accum(a, -g))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def back(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(a.data * b.data, (a, b), back)


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def back(g):
        _accum(a, _unbroadcast(g / b.data, a.data.shape))
        _accum(b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _make(a.data / b.data, (a, b), back)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if b.data.ndim != 2:
        raise ContractError(f"matmul weights must be 2-D, got {b.data.shape}")
    if a.data.ndim not in (1, 2) or a.data.shape[-1] != b.data.shape[0]:
        raise ContractError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")

    def back(g):
        if a.data.ndim == 1:
            _accum(a, b.data @ g)
            _accum(b, np.outer(a.data, g))
        else:
            _accum(a, g @ b.data.T)
            _accum(b, a.data.T @ g)

    return _make(a.data @ b.data, (a, b), back)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ContractError("transpose expects a matrix")
    return _make(np.ascontiguousarray(a.data.T), (a,), lambda g: _accum(a, g.T))


def reshape(a: Tensor, shape) -> Tensor:
    old = a.data.shape
    return _make(a.data.reshape(shape), (a,), lambda g: _accum(a, g.reshape(old)))


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    if not parts:
        raise ContractError("concat of zero tensors")
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def back(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            index = [slice(None)] * g.ndim
            index[axis] = slice(lo, hi)
            _accum(p, g[tuple(index)])

    return _make(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), back)


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    index = [slice(None)] * a.data.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)

    def back(g):
        if a.requires:
            full = np.zeros_like(a.data)
            full[index] = g
            _accum(a, full)

    return _make(a.data[index].copy(), (a,), back)


def take_rows(table: Tensor, ids: Sequence[int]) -> Tensor:
    ids = np.asarray(ids, dtype=np.intp)
    if ids.size and (ids.min() < 0 or ids.max() >= table.data.shape[0]):
        raise ContractError("row index outside embedding table")

    def back(g):
        if table.requires:
            full = np.zeros_like(table.data)
            np.add.at(full, ids, g)
            _accum(table, full)

    return _make(table.data[ids], (table,), back)


def repeat_rows(a: Tensor, n: int) -> Tensor:
    if a.data.ndim != 2 or a.data.shape[0] != 1:
        raise ContractError("repeat_rows expects a single-row matrix")
    return _make(
        np.repeat(a.data, n, axis=0), (a,), lambda g: _accum(a, g.sum(axis=0, keepdims=True))
    )


def total_sum(a: Tensor) -> Tensor:
    return _make(np.asarray(a.data.sum()), (a,), lambda g: _accum(a, np.broadcast_to(g, a.data.shape).copy()))


def total_mean(a: Tensor) -> Tensor:
    size = a.data.size

    def back(g):
        _accum(a, np.broadcast_to(g / size, a.data.shape).copy())

    return _make(np.asarray(a.data.mean()), (a,), back)


def mean_axis(a: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    n = a.data.shape[axis]

    def back(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g / n, a.data.shape).copy())

    return _make(a.data.mean(axis=axis, keepdims=keepdims), (a,), back)


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    return _make(y, (a,), lambda g: _accum(a, g * y))


def log(a: Tensor) -> Tensor:
    return _make(np.log(a.data), (a,), lambda g: _accum(a, g / a.data))


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return _make(y, (a,), lambda g: _accum(a, g * (1.0 - y * y)))


def sigmoid(a: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-a.data))
    return _make(y, (a,), lambda g: _accum(a, g * y * (1.0 - y)))


def pow_const(a: Tensor, p: float) -> Tensor:
    y = a.data**p
    return _make(y, (a,), lambda g: _accum(a, g * p * a.data ** (p - 1.0)))


def leaky_relu(a, slope: float = 0.01) -> Tensor:
    """x for x >= 0, slope * x otherwise."""
    if not 0.0 < slope < 1.0:
        raise DomainError(f"leaky_relu slope {slope!r} outside (0, 1)")
    a = _as_tensor(a)
    factor = np.where(a.data >= 0.0, 1.0, slope)
    return _make(a.data * factor, (a,), lambda g: _accum(a, g * factor))


def minimum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise minimum; gradient routes to ``a`` on ties."""
    a, b = _as_tensor(a), _as_tensor(b)
    take_a = a.data <= b.data

    def back(g):
        _accum(a, _unbroadcast(g * take_a, a.data.shape))
        _accum(b, _unbroadcast(g * ~take_a, b.data.shape))

    return _make(np.minimum(a.data, b.data), (a, b), back)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    inside = (a.data >= lo) & (a.data <= hi)
    return _make(np.clip(a.data, lo, hi), (a,), lambda g: _accum(a, g * inside))


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis, computed with max-subtraction."""
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        _accum(a, y * (g - (g * y).sum(axis=-1, keepdims=True)))

    return _make(y, (a,), back)


def log_softmax(a: Tensor) -> Tensor:
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    y = shifted - lse

    def back(g):
        _accum(a, g - np.exp(y) * g.sum(axis=-1, keepdims=True))

    return _make(y, (a,), back)


# -- layers -------------------------------------------------------------------


def dense(x, weights: Tensor, bias: Tensor) -> Tensor:
    """Affine map ``x @ weights + bias``."""
    x = _as_tensor(x)
    if weights.data.ndim != 2 or bias.data.shape != (weights.data.shape[1],):
        raise ContractError(
            f"dense expects weights (a, b) and bias (b,); got {weights.data.shape}, {bias.data.shape}"
        )
    return add(matmul(x, weights), bias)


class LstmParams(NamedTuple):
    w_x: Tensor  # (m, 4d)
    w_h: Tensor  # (d, 4d)
    b: Tensor  # (4d,) in gate order input/forget/candidate/output


def lstm_step(params: LstmParams, h_prev: Tensor, c_prev: Tensor, x: Tensor) -> tuple[Tensor, Tensor]:
    """One gated recurrent update; returns the new hidden and cell vectors."""
    d = h_prev.data.shape[-1]
    if params.w_x.data.shape != (x.data.shape[-1], 4 * d) or params.w_h.data.shape != (d, 4 * d):
        raise ContractError("lstm_step parameter shapes do not match inputs")
    pre = add(add(matmul(x, params.w_x), matmul(h_prev, params.w_h)), params.b)
    i_gate = sigmoid(narrow(pre, -1, 0, d))
    f_gate = sigmoid(narrow(pre, -1, d, d))
    g_cand = tanh(narrow(pre, -1, 2 * d, d))
    o_gate = sigmoid(narrow(pre, -1, 3 * d, d))
    c = add(mul(f_gate, c_prev), mul(i_gate, g_cand))
    h = mul(o_gate, tanh(c))
    return h, c


class GruParams(NamedTuple):
    w_x: Tensor  # (m, 3g)
    w_h: Tensor  # (g, 3g)
    b: Tensor  # (3g,) in gate order reset/update/candidate


def gru_step(params: GruParams, h_prev: Tensor, x: Tensor) -> Tensor:
    """One reset/update-gate recurrence; returns the new hidden vector."""
    g = h_prev.data.shape[-1]
    if params.w_x.data.shape != (x.data.shape[-1], 3 * g) or params.w_h.data.shape != (g, 3 * g):
        raise ContractError("gru_step parameter shapes do not match inputs")
    pre_x = add(matmul(x, params.w_x), params.b)
    pre_h = matmul(h_prev, params.w_h)
    r = sigmoid(add(narrow(pre_x, -1, 0, g), narrow(pre_h, -1, 0, g)))
    z = sigmoid(add(narrow(pre_x, -1, g, g), narrow(pre_h, -1, g, g)))
    n = tanh(add(narrow(pre_x, -1, 2 * g, g), mul(r, narrow(pre_h, -1, 2 * g, g))))
    return add(mul(z, h_prev), mul(sub(constant(1.0), z), n))


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor, return_weights: bool = False):
    """softmax(q k^T / sqrt(width)) v; each output row is a convex mix of v rows."""
    if q.data.shape[-1] != k.data.shape[-1]:
        raise ContractError("query and key widths differ")
    if k.data.shape[0] != v.data.shape[0]:
        raise ContractError("key and value row counts differ")
    if k.data.shape[0] == 0:
        raise DomainError("attention over an empty key set")
    scale = 1.0 / math.sqrt(q.data.shape[-1])
    weights = softmax(mul(matmul(q, transpose(k)), scale))
    out = matmul(weights, v)
    if return_weights:
        return out, weights
    return out


def layer_norm(x: Tensor, gain: Tensor, shift: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-row standardization followed by an affine map."""
    if x.data.ndim != 2 or x.data.shape[1] < 2:
        raise ContractError("layer_norm expects a matrix with at least 2 columns")
    mu = mean_axis(x, 1, keepdims=True)
    centered = sub(x, mu)
    var = mean_axis(mul(centered, centered), 1, keepdims=True)
    inv = pow_const(add(var, eps), -0.5)
    return add(mul(mul(centered, inv), gain), shift)


# -- backward pass and verification -------------------------------------------


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``grad`` of every reachable leaf.

    Gradients add onto whatever is already stored; zero the parameters
    first when starting a fresh step. The loss must be a scalar produced
    by recorded operations.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    if not loss.parents:
        raise ContractError("backward on a detached node (no recorded forward pass)")
    if not np.isfinite(loss.data):
        raise TrainingError(f"non-finite loss {loss.data!r}")

    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if node.node_id in visited:
            continue
        visited.add(node.node_id)
        stack.append((node, True))
        for parent in node.parents:
            if parent.requires and parent.node_id not in visited:
                stack.append((parent, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node.backward_fn is not None and node.grad is not None:
            node.backward_fn(node.grad)


def check_gradients(
    builder: Callable[..., Tensor], point: Sequence[np.ndarray], step: float = 1e-6
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``builder`` must be a deterministic scalar-valued function of its tensor
    arguments; every coordinate of every input is perturbed.
    """
    leaves = [Tensor(np.array(p, dtype=np.float64), requires=True) for p in point]
    loss = builder(*leaves)
    backward(loss)
    analytic = [np.zeros_like(l.data) if l.grad is None else l.grad.copy() for l in leaves]

    worst = 0.0
    base = [np.array(p, dtype=np.float64) for p in point]
    for which, arr in enumerate(base):
        flat = arr.reshape(-1)
        for idx in range(flat.size):
            saved = flat[idx]
            flat[idx] = saved + step
            f_plus = float(builder(*[Tensor(b) for b in base]).data)
            flat[idx] = saved - step
            f_minus = float(builder(*[Tensor(b) for b in base]).data)
            flat[idx] = saved
            numeric = (f_plus - f_minus) / (2.0 * step)
            a = analytic[which].reshape(-1)[idx]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1.0)
            worst = max(worst, err)
    return worst


# -- parameters and optimization ----------------------------------------------


class ParamSet:
    """Named trainable tensors; names are unique and ordered by insertion."""

    def __init__(self):
        self._items: dict[str, Tensor] = {}

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._items:
            raise ContractError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(data, dtype=np.float64), requires=True)
        self._items[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._items[name]

    def __contains__(self, name: str) -> bool:
        return name in self._items

    def __len__(self) -> int:
        return len(self._items)

    def names(self) -> list[str]:
        return list(self._items)

    def items(self):
        return self._items.items()

    def zero_grad(self) -> None:
        for t in self._items.values():
            t.grad = None

    def total_count(self) -> int:
        return sum(t.data.size for t in self._items.values())

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._items.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        if set(arrays) != set(self._items):
            missing = sorted(set(self._items) - set(arrays))
            extra = sorted(set(arrays) - set(self._items))
            raise ContractError(f"parameter names differ (missing={missing}, extra={extra})")
        for name, t in self._items.items():
            arr = np.asarray(arrays[name], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise ContractError(
                    f"shape mismatch for {name!r}: file {arr.shape}, model {t.data.shape}"
                )
            t.data = arr.copy()


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


@dataclass
class AdamState:
    """Per-parameter first/second moment accumulators and the step counter."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def for_params(cls, params: ParamSet) -> "AdamState":
        return cls(
            m={name: np.zeros_like(t.data) for name, t in params.items()},
            v={name: np.zeros_like(t.data) for name, t in params.items()},
        )


def adam_update(
    params: ParamSet,
    state: AdamState,
    lr: float = 3e-4,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected moment update, in place; missing grads count as zero."""
    state.step += 1
    correction1 = 1.0 - beta1**state.step
    correction2 = 1.0 - beta2**state.step
    for name, t in params.items():
        g = t.grad
        if g is None:
            continue
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for parameter {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        t.data -= lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
