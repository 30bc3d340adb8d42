"""Minimal reverse-mode tape over numpy arrays.

Exactly the operations the model zoo needs: elementwise arithmetic,
matmul, static slicing, concatenation, reductions, 1-D same-padded
cross-correlation, and a fused softmax/weighted-cross-entropy head.
Nodes whose parents all have requires_grad=False are pruned, so
inference builds no graph.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"

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

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self, seed=None):
        """Accumulate gradients of self (scalar unless seed given) into leaves."""
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        if seed is None:
            seed = np.ones_like(self.data)
        self.grad = np.asarray(seed, dtype=self.data.dtype)
        for node in reversed(topo):
            if node._backward is None:
                continue
            for p, g in zip(node._parents, node._backward(node.grad)):
                if g is None or not p.requires_grad:
                    continue
                p.grad = g if p.grad is None else p.grad + g


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _wrap_like(x, ref: Tensor) -> Tensor:
    """Wrap a constant; 0-d scalars adopt the reference dtype (no upcasting)."""
    if isinstance(x, Tensor):
        return x
    arr = np.asarray(x)
    if arr.ndim == 0 and arr.dtype != ref.data.dtype:
        arr = arr.astype(ref.data.dtype)
    return Tensor(arr)


def _node(data, parents, backward) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- arithmetic -------------------------------------------------------------

def add(a, b) -> Tensor:
    a = _wrap(a)
    b = _wrap_like(b, a)
    return _node(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)),
    )


def sub(a, b) -> Tensor:
    a = _wrap(a)
    b = _wrap_like(b, a)
    return _node(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)),
    )


def mul(a, b) -> Tensor:
    a = _wrap(a)
    b = _wrap_like(b, a)
    return _node(
        a.data * b.data,
        (a, b),
        lambda g: (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        ),
    )


def matmul(a, b) -> Tensor:
    """a [..., i] @ b [i, o]; the right operand must be a 2-D matrix."""
    a, b = _wrap(a), _wrap(b)
    if b.data.ndim != 2:
        raise ValueError("matmul expects a 2-D right operand")

    def back(g):
        ga = g @ b.data.T
        gb = np.tensordot(a.data, g, axes=(tuple(range(a.data.ndim - 1)),) * 2)
        return ga, gb

    return _node(a.data @ b.data, (a, b), back)


def power(a, exponent: float) -> Tensor:
    a = _wrap(a)
    out = a.data ** exponent
    return _node(out, (a,), lambda g: (g * exponent * a.data ** (exponent - 1),))


# -- nonlinearities ---------------------------------------------------------

def sigmoid(a) -> Tensor:
    a = _wrap(a)
    # tanh form avoids exp overflow in float32
    s = 0.5 * (np.tanh(0.5 * a.data) + 1.0)
    return _node(s, (a,), lambda g: (g * s * (1.0 - s),))


def tanh(a) -> Tensor:
    a = _wrap(a)
    y = np.tanh(a.data)
    return _node(y, (a,), lambda g: (g * (1.0 - y * y),))


def relu(a) -> Tensor:
    a = _wrap(a)
    mask = a.data > 0
    return _node(np.where(mask, a.data, 0), (a,), lambda g: (g * mask,))


# -- shape ops --------------------------------------------------------------

def index(a, key) -> Tensor:
    """Static slice/int indexing."""
    a = _wrap(a)

    def back(g):
        z = np.zeros_like(a.data)
        np.add.at(z, key, g)
        return (z,)

    return _node(a.data[key], (a,), back)


def reshape(a, shape) -> Tensor:
    a = _wrap(a)
    return _node(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.data.shape),))


def transpose(a, axes) -> Tensor:
    a = _wrap(a)
    inv = tuple(np.argsort(axes))
    return _node(a.data.transpose(axes), (a,), lambda g: (g.transpose(inv),))


def concat(parts, axis: int) -> Tensor:
    parts = [_wrap(p) for p in parts]
    sizes = [p.data.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.split(g, splits, axis=axis))

    return _node(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), back)


# -- reductions -------------------------------------------------------------

def mean(a, axis, keepdims: bool = False) -> Tensor:
    a = _wrap(a)
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    count = int(np.prod([a.data.shape[i] for i in axes]))
    out = a.data.mean(axis=axes, keepdims=keepdims)

    def back(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.data.shape) / count,)

    return _node(out, (a,), back)


def total(a) -> Tensor:
    """Sum of all elements to a scalar."""
    a = _wrap(a)
    return _node(
        a.data.sum(), (a,), lambda g: (np.broadcast_to(g, a.data.shape).copy(),)
    )


def flip(a, axis: int) -> Tensor:
    a = _wrap(a)
    return _node(np.flip(a.data, axis).copy(), (a,), lambda g: (np.flip(g, axis),))


# -- recurrent sequence -------------------------------------------------------

def lstm_sequence(xp, recurrent) -> Tensor:
    """All hidden states of an LSTM layer from precomputed input projections.

    xp [B, T, 4u] already holds x_t @ kernel + bias per step (gate order
    i,f,g,o); recurrent is [u, 4u]. Returns [B, T, u]. Zero initial state.
    The backward pass is hand-derived backpropagation through time,
    verified against finite differences in the gradient-check suite.
    """
    xp, recurrent = _wrap(xp), _wrap(recurrent)
    B, T, four_u = xp.data.shape
    u = four_u // 4
    U = recurrent.data
    dt = xp.data.dtype

    def sig(z):
        return 0.5 * (np.tanh(0.5 * z) + 1.0)

    i_all = np.empty((B, T, u), dt)
    f_all = np.empty((B, T, u), dt)
    g_all = np.empty((B, T, u), dt)
    o_all = np.empty((B, T, u), dt)
    c_all = np.empty((B, T, u), dt)
    tc_all = np.empty((B, T, u), dt)
    hs = np.empty((B, T, u), dt)
    h = np.zeros((B, u), dt)
    c = np.zeros((B, u), dt)
    for t in range(T):
        pre = xp.data[:, t] + h @ U
        i = sig(pre[:, :u])
        f = sig(pre[:, u : 2 * u])
        g = np.tanh(pre[:, 2 * u : 3 * u])
        o = sig(pre[:, 3 * u :])
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        i_all[:, t], f_all[:, t], g_all[:, t], o_all[:, t] = i, f, g, o
        c_all[:, t], tc_all[:, t], hs[:, t] = c, tc, h

    def back(ghs):
        dxp = np.empty_like(xp.data)
        dU = np.zeros_like(U)
        dh_next = np.zeros((B, u), dt)
        dc_next = np.zeros((B, u), dt)
        for t in reversed(range(T)):
            i, f, g, o = i_all[:, t], f_all[:, t], g_all[:, t], o_all[:, t]
            tc = tc_all[:, t]
            c_prev = c_all[:, t - 1] if t > 0 else np.zeros((B, u), dt)
            dh = ghs[:, t] + dh_next
            dc = dh * o * (1.0 - tc * tc) + dc_next
            dpre = np.concatenate(
                [
                    dc * g * i * (1.0 - i),
                    dc * c_prev * f * (1.0 - f),
                    dc * i * (1.0 - g * g),
                    dh * tc * o * (1.0 - o),
                ],
                axis=1,
            )
            dxp[:, t] = dpre
            if t > 0:
                dU += hs[:, t - 1].T @ dpre
            dh_next = dpre @ U.T
            dc_next = dc * f
        return dxp, dU

    return _node(hs, (xp, recurrent), back)


# -- convolution ------------------------------------------------------------

def conv1d(x, w, b) -> Tensor:
    """Same-padded cross-correlation along time.

    x [B, C, T], w [F, C, K], b [F] -> [B, F, T]; zero padding
    (K-1)//2 left, K-1-(K-1)//2 right.
    """
    x, w, b = _wrap(x), _wrap(w), _wrap(b)
    B, C, T = x.data.shape
    F, Cw, K = w.data.shape
    if Cw != C:
        raise ValueError(f"kernel channels {Cw} != input channels {C}")
    pl = (K - 1) // 2
    xpad = np.zeros((B, C, T + K - 1), dtype=x.data.dtype)
    xpad[:, :, pl : pl + T] = x.data
    out = np.zeros((B, F, T), dtype=x.data.dtype)
    for k in range(K):
        out += np.einsum("bct,fc->bft", xpad[:, :, k : k + T], w.data[:, :, k])
    out += b.data[None, :, None]

    def back(g):
        db = g.sum(axis=(0, 2))
        dw = np.zeros_like(w.data)
        dxpad = np.zeros_like(xpad)
        for k in range(K):
            dw[:, :, k] = np.einsum("bft,bct->fc", g, xpad[:, :, k : k + T])
            dxpad[:, :, k : k + T] += np.einsum("bft,fc->bct", g, w.data[:, :, k])
        return dxpad[:, :, pl : pl + T], dw, db

    return _node(out, (x, w, b), back)


# -- classification head ----------------------------------------------------

LOG_CLAMP = 1e-12


def softmax(logits: np.ndarray) -> np.ndarray:
    """Plain (non-tape) stable softmax over the last axis."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, y: np.ndarray, class_weights: np.ndarray) -> Tensor:
    """Weighted cross-entropy, averaged over the batch; log clamped at 1e-12.

    logits [B, n] tensor, y [B] int labels, class_weights [n].
    """
    logits = _wrap(logits)
    p = softmax(logits.data)
    B = p.shape[0]
    wy = np.asarray(class_weights, dtype=p.dtype)[y]
    picked = np.maximum(p[np.arange(B), y], LOG_CLAMP)
    loss = np.asarray((-wy * np.log(picked)).mean(), dtype=p.dtype)

    def back(g):
        onehot = np.zeros_like(p)
        onehot[np.arange(B), y] = 1.0
        return ((p - onehot) * wy[:, None] * (g / B),)

    return _node(loss, (logits,), back)
