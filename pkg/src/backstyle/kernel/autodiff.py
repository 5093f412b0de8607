"""Dense float64 tensors with a reverse-mode differentiation tape.

Every model in this package is built from the ops defined here. Each op
returns new immutable ``Tensor`` values and records a closure that pushes
gradients back to its inputs; ``backward`` replays those closures in reverse
topological order. The op set is deliberately small: elementwise arithmetic,
matmul, the classic activations, concat/stack/reshape plumbing, a
temperature-controlled softmax, a log-sum-exp stabilised cross entropy, an
embedding lookup, and three fused ops (LSTM cell, 1-d convolution with max
pooling over time, dot-product attention) whose backward rules are derived by
hand and verified against central finite differences in the test suite.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "Graph",
    "NonFiniteError",
    "ShapeError",
    "no_grad",
    "constant",
    "backward",
    "add",
    "sub",
    "mul",
    "neg",
    "scale",
    "matmul",
    "tanh",
    "sigmoid",
    "relu",
    "concat",
    "stack_steps",
    "reshape",
    "sum_all",
    "mean_all",
    "softmax_tau",
    "cross_entropy_logits",
    "embedding",
    "lstm_cell",
    "conv1d_maxpool",
    "attn_scores",
    "attn_context",
]


class NonFiniteError(ArithmeticError):
    """An op produced NaN or Inf."""


class ShapeError(ValueError):
    """Operands have incompatible shapes for the requested op."""


_GRAD_ENABLED = True


class no_grad:
    """Context manager that suspends tape recording (inference mode)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


class Tensor:
    """Immutable float64 array plus the tape bookkeeping for one node.

    ``data`` is marked non-writeable on construction; updates happen by
    creating replacement tensors, never by mutating in place. ``grad`` is a
    plain ndarray accumulated during ``backward``. Every constructor call
    checks finiteness, so no public op can silently emit NaN/Inf.
    """

    __slots__ = ("data", "grad", "op", "parents", "_bwd", "requires_grad")

    def __init__(self, data, requires_grad=False, op="leaf", parents=(), bwd=None):
        arr = np.asarray(data, dtype=np.float64)
        if not np.isfinite(arr).all():
            raise NonFiniteError(f"non-finite values produced by op {op!r}")
        try:
            arr.flags.writeable = False
        except ValueError:
            arr = arr.copy()
            arr.flags.writeable = False
        self.data = arr
        self.grad = None
        self.op = op
        self.parents = parents
        self._bwd = bwd
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def backward(self) -> "Graph":
        return backward(self)

    def __repr__(self):
        return f"Tensor(op={self.op!r}, shape={self.data.shape})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def constant(data) -> Tensor:
    """A leaf tensor that takes no gradient (inputs, cached codes, masks)."""
    return Tensor(data, requires_grad=False)


def _coerce(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, op, parents, bwd) -> Tensor:
    """Build an op result; outside no_grad it joins the tape."""
    if not _GRAD_ENABLED:
        return Tensor(data, op=op)
    rg = any(p.requires_grad for p in parents)
    if not rg:
        return Tensor(data, op=op)
    return Tensor(data, requires_grad=True, op=op, parents=parents, bwd=bwd)


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros(t.data.shape)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


class Graph:
    """Topologically ordered record of the ops feeding one root tensor.

    ``nodes`` lists every gradient-bearing tensor reachable from the root,
    parents strictly before children; ``backward`` walks it in reverse.
    """

    def __init__(self, nodes):
        self.nodes = nodes

    @classmethod
    def trace(cls, root: Tensor) -> "Graph":
        if not root.requires_grad:
            return cls([])
        order = []
        seen = {id(root)}
        stack = [(root, iter(root.parents))]
        while stack:
            node, it = stack[-1]
            pushed = False
            for p in it:
                if p.requires_grad and id(p) not in seen:
                    seen.add(id(p))
                    stack.append((p, iter(p.parents)))
                    pushed = True
                    break
            if not pushed:
                order.append(node)
                stack.pop()
        return cls(order)

    def backward(self, root: Tensor) -> None:
        root.grad = np.ones(root.data.shape)
        for node in reversed(self.nodes):
            if node._bwd is None or node.grad is None:
                continue
            node._bwd(node.grad)


def backward(loss: Tensor) -> Graph:
    """Accumulate d(loss)/d(leaf) into ``.grad`` for every reachable leaf.

    ``loss`` must be scalar. Returns the traced graph. Multi-output ops whose
    secondary output never reached the loss are skipped (their grad is None).
    """
    if loss.size != 1:
        raise ShapeError(f"backward requires a scalar loss, got shape {loss.shape}")
    graph = Graph.trace(loss)
    graph.backward(loss)
    return graph


def add(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    out_data = a.data + b.data

    def bwd(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _make(out_data, "add", (a, b), bwd)


def sub(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    out_data = a.data - b.data

    def bwd(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(-g, b.data.shape))

    return _make(out_data, "sub", (a, b), bwd)


def mul(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    out_data = a.data * b.data

    def bwd(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(out_data, "mul", (a, b), bwd)


def neg(a) -> Tensor:
    a = _coerce(a)

    def bwd(g):
        _accum(a, -g)

    return _make(-a.data, "neg", (a,), bwd)


def scale(a, s: float) -> Tensor:
    a = _coerce(a)
    s = float(s)

    def bwd(g):
        _accum(a, g * s)

    return _make(a.data * s, "scale", (a,), bwd)


def matmul(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    if a.ndim > 2 or b.ndim > 2 or a.ndim == 0 or b.ndim == 0:
        raise ShapeError(f"matmul supports 1-d/2-d operands, got {a.shape} @ {b.shape}")
    if a.data.shape[-1] != b.data.shape[0]:
        raise ShapeError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    out_data = a.data @ b.data

    def bwd(g):
        ad, bd = a.data, b.data
        if ad.ndim == 2 and bd.ndim == 2:
            _accum(a, g @ bd.T)
            _accum(b, ad.T @ g)
        elif ad.ndim == 1 and bd.ndim == 2:
            _accum(a, bd @ g)
            _accum(b, np.outer(ad, g))
        elif ad.ndim == 2 and bd.ndim == 1:
            _accum(a, np.outer(g, bd))
            _accum(b, ad.T @ g)
        else:
            _accum(a, g * bd)
            _accum(b, g * ad)

    return _make(out_data, "matmul", (a, b), bwd)


def tanh(a) -> Tensor:
    a = _coerce(a)
    y = np.tanh(a.data)

    def bwd(g):
        _accum(a, g * (1.0 - y * y))

    return _make(y, "tanh", (a,), bwd)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # piecewise form avoids overflow in exp for large |x|
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a) -> Tensor:
    a = _coerce(a)
    y = _sigmoid(a.data)

    def bwd(g):
        _accum(a, g * y * (1.0 - y))

    return _make(y, "sigmoid", (a,), bwd)


def relu(a) -> Tensor:
    a = _coerce(a)
    mask = a.data > 0

    def bwd(g):
        _accum(a, g * mask)

    return _make(np.where(mask, a.data, 0.0), "relu", (a,), bwd)


def concat(tensors, axis: int = 0) -> Tensor:
    ts = [_coerce(t) for t in tensors]
    if not ts:
        raise ShapeError("concat of an empty sequence")
    out_data = np.concatenate([t.data for t in ts], axis=axis)
    sizes = [t.data.shape[axis] for t in ts]
    bounds = np.cumsum([0] + sizes)

    def bwd(g):
        for t, lo, hi in zip(ts, bounds[:-1], bounds[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            _accum(t, g[tuple(idx)])

    return _make(out_data, "concat", tuple(ts), bwd)


def stack_steps(tensors, axis: int = 1) -> Tensor:
    """Stack equal-shape tensors along a new axis (time axis for sequences)."""
    ts = [_coerce(t) for t in tensors]
    if not ts:
        raise ShapeError("stack of an empty sequence")
    out_data = np.stack([t.data for t in ts], axis=axis)

    def bwd(g):
        pieces = np.moveaxis(g, axis, 0)
        for t, piece in zip(ts, pieces):
            _accum(t, piece)

    return _make(out_data, "stack", tuple(ts), bwd)


def reshape(a, shape) -> Tensor:
    a = _coerce(a)
    shape = tuple(shape)
    out_data = a.data.reshape(shape)

    def bwd(g):
        _accum(a, g.reshape(a.data.shape))

    return _make(out_data, "reshape", (a,), bwd)


def sum_all(a) -> Tensor:
    a = _coerce(a)

    def bwd(g):
        _accum(a, np.full(a.data.shape, float(g)))

    return _make(a.data.sum(), "sum", (a,), bwd)


def mean_all(a) -> Tensor:
    a = _coerce(a)
    n = a.data.size

    def bwd(g):
        _accum(a, np.full(a.data.shape, float(g) / n))

    return _make(a.data.mean(), "mean", (a,), bwd)


def softmax_tau(logits, tau: float) -> Tensor:
    """Temperature-controlled softmax over the last axis.

    tau -> 0 sharpens toward the argmax one-hot; tau large flattens toward
    uniform. Stabilised by max subtraction, so any finite logits are safe.
    """
    if tau <= 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    a = _coerce(logits)
    z = a.data / tau
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)

    def bwd(g):
        inner = (g * y).sum(axis=-1, keepdims=True)
        _accum(a, y * (g - inner) / tau)

    return _make(y, "softmax_tau", (a,), bwd)


def cross_entropy_logits(logits, targets, reduction: str = "mean") -> Tensor:
    """Softmax cross entropy from raw logits, stabilised via log-sum-exp.

    ``logits`` is (N, V), ``targets`` an int array of shape (N,). Never
    exponentiates unshifted logits, so large scores do not overflow.
    """
    a = _coerce(logits)
    t = np.asarray(targets)
    if a.ndim != 2 or t.ndim != 1 or t.shape[0] != a.data.shape[0]:
        raise ShapeError(f"cross entropy expects (N,V) logits and (N,) targets, got {a.shape} and {t.shape}")
    if t.min() < 0 or t.max() >= a.data.shape[1]:
        raise ValueError("target id out of range")
    if reduction not in ("mean", "sum"):
        raise ValueError(f"unknown reduction {reduction!r}")
    n = a.data.shape[0]
    m = a.data.max(axis=1, keepdims=True)
    shifted = a.data - m
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True)) + m
    nll = lse[:, 0] - a.data[np.arange(n), t]
    out_data = nll.mean() if reduction == "mean" else nll.sum()
    w = 1.0 / n if reduction == "mean" else 1.0

    def bwd(g):
        p = np.exp(a.data - lse)
        p[np.arange(n), t] -= 1.0
        _accum(a, p * (float(g) * w))

    return _make(out_data, "cross_entropy", (a,), bwd)


def embedding(table, ids) -> Tensor:
    """Row lookup in an embedding table; gradients scatter-add by row."""
    tab = _coerce(table)
    idx = np.asarray(ids)
    if tab.ndim != 2:
        raise ShapeError(f"embedding table must be 2-d, got {tab.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= tab.data.shape[0]):
        raise ValueError("embedding id out of range")
    out_data = tab.data[idx]

    def bwd(g):
        if not tab.requires_grad:
            return
        if tab.grad is None:
            tab.grad = np.zeros(tab.data.shape)
        np.add.at(tab.grad, idx.ravel(), g.reshape(-1, tab.data.shape[1]))

    return _make(out_data, "embedding", (tab,), bwd)


def lstm_cell(x, h_prev, c_prev, wx, wh, b):
    """One LSTM step; returns (h, c) as two tape nodes sharing one forward.

    Gate layout along the 4H axis is [input, forget, cell, output]. The two
    outputs carry independent backward rules; because every downstream
    quantity is linear in the incoming cotangents, their contributions add up
    to the classic combined LSTM backward.
    """
    x, h_prev, c_prev = _coerce(x), _coerce(h_prev), _coerce(c_prev)
    wx, wh, b = _coerce(wx), _coerce(wh), _coerce(b)
    if x.ndim != 2 or h_prev.ndim != 2 or c_prev.ndim != 2:
        raise ShapeError("lstm_cell expects 2-d (batch, features) inputs")
    bsz, din = x.data.shape
    hdim = h_prev.data.shape[1]
    if wx.data.shape != (din, 4 * hdim):
        raise ShapeError(f"wx must be ({din}, {4 * hdim}), got {wx.shape}")
    if wh.data.shape != (hdim, 4 * hdim):
        raise ShapeError(f"wh must be ({hdim}, {4 * hdim}), got {wh.shape}")
    if b.data.shape != (4 * hdim,):
        raise ShapeError(f"b must be ({4 * hdim},), got {b.shape}")
    if h_prev.data.shape != (bsz, hdim) or c_prev.data.shape != (bsz, hdim):
        raise ShapeError("state shapes do not match (batch, hidden)")

    gates = x.data @ wx.data + h_prev.data @ wh.data + b.data
    i = _sigmoid(gates[:, 0 * hdim:1 * hdim])
    f = _sigmoid(gates[:, 1 * hdim:2 * hdim])
    g_ = np.tanh(gates[:, 2 * hdim:3 * hdim])
    o = _sigmoid(gates[:, 3 * hdim:4 * hdim])
    c_new = f * c_prev.data + i * g_
    tc = np.tanh(c_new)
    h_new = o * tc

    parents = (x, h_prev, c_prev, wx, wh, b)

    def push(dc, do):
        di = dc * g_
        df = dc * c_prev.data
        dg = dc * i
        dgates = np.concatenate(
            [di * i * (1 - i), df * f * (1 - f), dg * (1 - g_ * g_), do * o * (1 - o)],
            axis=1,
        )
        _accum(x, dgates @ wx.data.T)
        _accum(h_prev, dgates @ wh.data.T)
        _accum(c_prev, dc * f)
        _accum(wx, x.data.T @ dgates)
        _accum(wh, h_prev.data.T @ dgates)
        _accum(b, dgates.sum(axis=0))

    def bwd_h(gh):
        push(gh * o * (1 - tc * tc), gh * tc)

    def bwd_c(gc):
        push(gc, np.zeros_like(gc))

    h_out = _make(h_new, "lstm_h", parents, bwd_h)
    c_out = _make(c_new, "lstm_c", parents, bwd_c)
    return h_out, c_out


def conv1d_maxpool(seq, weights, bias) -> Tensor:
    """Filter bank over time followed by max pooling over positions.

    ``seq`` is (T, D) or (B, T, D); ``weights`` is (K, W, D); ``bias`` (K,).
    Sequences shorter than the filter width are zero-padded on the right.
    Returns (K,) or (B, K): the max response of each filter over positions.
    """
    s, w, b = _coerce(seq), _coerce(weights), _coerce(bias)
    squeeze = s.ndim == 2
    data = s.data[None] if squeeze else s.data
    if data.ndim != 3 or w.ndim != 3 or b.ndim != 1:
        raise ShapeError("conv1d_maxpool expects (B,T,D) seq, (K,W,D) weights, (K,) bias")
    bsz, tlen, dim = data.shape
    k, width, wdim = w.data.shape
    if wdim != dim:
        raise ShapeError(f"filter depth {wdim} does not match input depth {dim}")
    if b.data.shape != (k,):
        raise ShapeError("bias length must equal filter count")
    pad = max(0, width - tlen)
    padded = np.pad(data, ((0, 0), (0, pad), (0, 0))) if pad else data
    # windows: (B, P, D, W) with P positions
    win = np.lib.stride_tricks.sliding_window_view(padded, width, axis=1)
    resp = np.einsum("bpdw,kwd->bpk", win, w.data) + b.data
    best = resp.argmax(axis=1)  # (B, K)
    rows = np.arange(bsz)[:, None]
    out_data = resp[rows, best, np.arange(k)[None, :]]
    if squeeze:
        out_data = out_data[0]

    def bwd(g):
        g3 = g[None] if squeeze else g
        offs = np.arange(width)
        pos = best[:, :, None] + offs[None, None, :]  # (B, K, W)
        bidx = np.broadcast_to(rows[:, :, None], pos.shape)
        if w.requires_grad:
            win_sel = padded[bidx, pos, :]  # (B, K, W, D)
            if w.grad is None:
                w.grad = np.zeros(w.data.shape)
            w.grad += np.einsum("bk,bkwd->kwd", g3, win_sel)
        _accum(b, g3.sum(axis=0))
        if s.requires_grad:
            dpad = np.zeros(padded.shape)
            gw = g3[:, :, None, None] * w.data[None]  # (B, K, W, D)
            np.add.at(dpad, (bidx, pos), gw)
            ds = dpad[:, :tlen, :]
            _accum(s, ds[0] if squeeze else ds)

    return _make(out_data, "conv1d_maxpool", (s, w, b), bwd)


def attn_scores(query, states) -> Tensor:
    """Dot-product scores of one query per batch row against all positions.

    ``query`` is (B, D), ``states`` (B, T, D); returns (B, T).
    """
    q, hbar = _coerce(query), _coerce(states)
    if q.ndim != 2 or hbar.ndim != 3 or q.data.shape[0] != hbar.data.shape[0] or q.data.shape[1] != hbar.data.shape[2]:
        raise ShapeError(f"attn_scores expects (B,D) and (B,T,D), got {q.shape} and {hbar.shape}")
    out_data = np.einsum("bd,btd->bt", q.data, hbar.data)

    def bwd(g):
        _accum(q, np.einsum("bt,btd->bd", g, hbar.data))
        _accum(hbar, g[:, :, None] * q.data[:, None, :])

    return _make(out_data, "attn_scores", (q, hbar), bwd)


def attn_context(weights, states) -> Tensor:
    """Attention-weighted sum of encoder states: (B,T) x (B,T,D) -> (B,D)."""
    a, hbar = _coerce(weights), _coerce(states)
    if a.ndim != 2 or hbar.ndim != 3 or a.data.shape != hbar.data.shape[:2]:
        raise ShapeError(f"attn_context expects (B,T) and (B,T,D), got {a.shape} and {hbar.shape}")
    out_data = np.einsum("bt,btd->bd", a.data, hbar.data)

    def bwd(g):
        _accum(a, np.einsum("bd,btd->bt", g, hbar.data))
        _accum(hbar, a.data[:, :, None] * g[:, None, :])

    return _make(out_data, "attn_context", (a, hbar), bwd)
