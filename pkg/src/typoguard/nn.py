"""Dense tensors with reverse-mode automatic differentiation.

A small tape engine: every op computes its forward value with numpy and,
when gradients are enabled, records a closure that propagates the output
gradient to its parents. ``backward`` on a scalar visits the recorded
nodes in reverse topological order exactly once.

Storage defaults to float32; gradient-check suites build float64 graphs by
creating float64 parameters (ops preserve the input dtype).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_DTYPE = np.float32

_GRAD_ENABLED = True
_DEBUG_CHECKS = False


class NumericError(ArithmeticError):
    """Non-finite value produced during numeric computation (CLI exit 4)."""


def set_debug_checks(enabled: bool) -> None:
    """When on, every op asserts its output is finite."""
    global _DEBUG_CHECKS
    _DEBUG_CHECKS = enabled


class no_grad:
    """Context manager disabling tape recording (inference mode)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._saved = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._saved
        return False


class Tensor:
    """A dense array plus the tape links needed for backpropagation."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Backpropagate from a scalar through the recorded tape."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar output")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={'yes' if self.requires_grad else 'no'})"


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _node(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    if _DEBUG_CHECKS and not np.all(np.isfinite(data)):
        raise NumericError("non-finite value in op output")
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, size in enumerate(shape):
        if size == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# Ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data @ b.data

    def bw(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _node(data, (a, b), bw)


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data

    def bw(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _node(data, (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data

    def bw(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _node(data, (a, b), bw)


def scale(a: Tensor, k: float) -> Tensor:
    data = a.data * k

    def bw(g):
        _accum(a, g * k)

    return _node(data, (a,), bw)


def sigmoid(a: Tensor) -> Tensor:
    # 0.5*(tanh(x/2)+1) is overflow-free for large |x|
    s = 0.5 * (np.tanh(0.5 * a.data) + 1.0)

    def bw(g):
        _accum(a, g * s * (1.0 - s))

    return _node(s, (a,), bw)


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)

    def bw(g):
        _accum(a, g * (1.0 - y * y))

    return _node(y, (a,), bw)


def concat(parts: tuple[Tensor, ...] | list[Tensor], axis: int = 0) -> Tensor:
    parts = tuple(parts)
    data = np.concatenate([p.data for p in parts], axis=axis)

    def bw(g):
        ofs = 0
        for p in parts:
            n = p.data.shape[axis]
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(ofs, ofs + n)
            _accum(p, g[tuple(sl)])
            ofs += n

    return _node(data, parts, bw)


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    data = a.data[:, start:stop]

    def bw(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            a.grad[:, start:stop] += g

    return _node(data, (a,), bw)


def row(a: Tensor, index: int) -> Tensor:
    data = a.data[index : index + 1]

    def bw(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            a.grad[index : index + 1] += g

    return _node(data, (a,), bw)


def sum_all(a: Tensor) -> Tensor:
    data = np.asarray(a.data.sum())

    def bw(g):
        _accum(a, np.broadcast_to(g, a.data.shape).astype(a.data.dtype))

    return _node(data, (a,), bw)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Row gather; id i selects table[i]. Gradient scatter-adds by id."""
    idx = np.asarray(ids, dtype=np.int64)
    data = table.data[idx]

    def bw(g):
        if table.requires_grad:
            if table.grad is None:
                table.grad = np.zeros_like(table.data)
            np.add.at(table.grad, idx, g)

    return _node(data, (table,), bw)


def _log_softmax(x: np.ndarray) -> np.ndarray:
    m = x.max(axis=-1, keepdims=True)
    z = x - m
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax_np(x: np.ndarray) -> np.ndarray:
    return np.exp(_log_softmax(x))


def softmax_xent(logits: Tensor, target: int) -> Tensor:
    """Negative log-likelihood of ``target`` under log-softmax(logits)."""
    flat = logits.data.reshape(-1)
    logp = _log_softmax(flat)
    loss = np.asarray(-logp[target])
    probs = np.exp(logp)

    def bw(g):
        gl = probs.copy()
        gl[target] -= 1.0
        _accum(logits, (gl * g).reshape(logits.data.shape))

    return _node(loss, (logits,), bw)


def softmax_xent_rows(logits: Tensor, targets, mask=None) -> Tensor:
    """Mean per-row cross-entropy; rows where ``mask`` is False are skipped."""
    tgt = np.asarray(targets, dtype=np.int64)
    logp = _log_softmax(logits.data)
    rows = np.arange(logits.data.shape[0]) if mask is None else np.flatnonzero(mask)
    if rows.size == 0:
        raise ValueError("no rows selected for the loss")
    loss = np.asarray(-logp[rows, tgt[rows]].sum() / rows.size)

    def bw(g):
        grad = np.zeros_like(logits.data)
        grad[rows] = np.exp(logp[rows])
        grad[rows, tgt[rows]] -= 1.0
        _accum(logits, grad * (g / rows.size))

    return _node(loss, (logits,), bw)


# ---------------------------------------------------------------------------
# Parameter initialization


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...], dtype=None) -> np.ndarray:
    a = math.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-a, a, size=shape).astype(dtype or DEFAULT_DTYPE)


def parameter(data: np.ndarray) -> Tensor:
    return Tensor(data, requires_grad=True)


# ---------------------------------------------------------------------------
# LSTM / BiLSTM
#
# Gate layout along the 4H axis is (input, forget, cell, output).


@dataclass
class LstmParams:
    wx: Tensor  # (D, 4H)
    wh: Tensor  # (H, 4H)
    b: Tensor  # (4H,)

    @property
    def hidden_size(self) -> int:
        return self.wh.data.shape[0]

    @property
    def input_size(self) -> int:
        return self.wx.data.shape[0]

    def tensors(self) -> list[Tensor]:
        return [self.wx, self.wh, self.b]

    def check_shapes(self) -> None:
        d, h = self.input_size, self.hidden_size
        if self.wx.data.shape != (d, 4 * h) or self.wh.data.shape != (h, 4 * h) or self.b.data.shape != (4 * h,):
            raise ValueError("inconsistent LSTM parameter shapes")


def init_lstm(rng: np.random.Generator, input_size: int, hidden: int, dtype=None) -> LstmParams:
    dtype = dtype or DEFAULT_DTYPE
    b = np.zeros(4 * hidden, dtype=dtype)
    b[hidden : 2 * hidden] = 1.0  # forget-gate bias
    return LstmParams(
        wx=parameter(glorot_uniform(rng, (input_size, 4 * hidden), dtype)),
        wh=parameter(glorot_uniform(rng, (hidden, 4 * hidden), dtype)),
        b=parameter(b),
    )


def lstm_step(x: Tensor, h: Tensor, c: Tensor, p: LstmParams) -> tuple[Tensor, Tensor]:
    """One LSTM recurrence step; x is (1, D), h and c are (1, H)."""
    hd = p.hidden_size
    z = add(add(matmul(x, p.wx), matmul(h, p.wh)), p.b)
    i = sigmoid(slice_cols(z, 0, hd))
    f = sigmoid(slice_cols(z, hd, 2 * hd))
    g = tanh(slice_cols(z, 2 * hd, 3 * hd))
    o = sigmoid(slice_cols(z, 3 * hd, 4 * hd))
    c2 = add(mul(f, c), mul(i, g))
    h2 = mul(o, tanh(c2))
    return h2, c2


def lstm_run(xs: list[Tensor], p: LstmParams, reverse: bool = False) -> list[Tensor]:
    """Per-position hidden states from a zero initial state."""
    n = len(xs)
    dtype = p.wx.data.dtype
    h = Tensor(np.zeros((1, p.hidden_size), dtype=dtype))
    c = Tensor(np.zeros((1, p.hidden_size), dtype=dtype))
    out: list[Tensor | None] = [None] * n
    order = range(n - 1, -1, -1) if reverse else range(n)
    for t in order:
        h, c = lstm_step(xs[t], h, c, p)
        out[t] = h
    return out  # type: ignore[return-value]


def bilstm_forward(xs: list[Tensor], fwd: LstmParams, bwd: LstmParams) -> list[Tensor]:
    """Concatenate forward and backward states per position (width 2H)."""
    hf = lstm_run(xs, fwd)
    hb = lstm_run(xs, bwd, reverse=True)
    return [concat((hf[t], hb[t]), axis=1) for t in range(len(xs))]


# ---------------------------------------------------------------------------
# Fast inference paths (numpy only, no tape).
#
# These mirror lstm_run/bilstm_forward exactly; a unit test pins the two
# implementations against each other.


def _sig(z: np.ndarray) -> np.ndarray:
    return 0.5 * (np.tanh(0.5 * z) + 1.0)


def lstm_run_np(x: np.ndarray, p: LstmParams, reverse: bool = False) -> np.ndarray:
    n, hd = x.shape[0], p.hidden_size
    pre = x @ p.wx.data + p.b.data
    wh = p.wh.data
    h = np.zeros(hd, dtype=pre.dtype)
    c = np.zeros(hd, dtype=pre.dtype)
    out = np.empty((n, hd), dtype=pre.dtype)
    order = range(n - 1, -1, -1) if reverse else range(n)
    for t in order:
        z = pre[t] + h @ wh
        i = _sig(z[:hd])
        f = _sig(z[hd : 2 * hd])
        g = np.tanh(z[2 * hd : 3 * hd])
        o = _sig(z[3 * hd :])
        c = f * c + i * g
        h = o * np.tanh(c)
        out[t] = h
    return out


def bilstm_forward_np(x: np.ndarray, fwd: LstmParams, bwd: LstmParams) -> np.ndarray:
    return np.concatenate([lstm_run_np(x, fwd), lstm_run_np(x, bwd, reverse=True)], axis=1)


# ---------------------------------------------------------------------------
# Optimizers


class Sgd:
    """Plain gradient descent."""

    def __init__(self, params: list[Tensor], lr: float = 0.1):
        self.params = list(params)
        self.lr = lr

    def step(self) -> None:
        for p in self.params:
            if p.grad is not None:
                p.data -= self.lr * p.grad

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


class Adam:
    """Adaptive-moment descent with bias correction."""

    def __init__(self, params: list[Tensor], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p, m, v in zip(self.params, self._m, self._v):
            if p.grad is None:
                continue
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def make_optimizer(name: str, params: list[Tensor], lr: float):
    if name == "adam":
        return Adam(params, lr=lr)
    if name == "sgd":
        return Sgd(params, lr=lr)
    raise ValueError(f"unknown optimizer {name!r}")
