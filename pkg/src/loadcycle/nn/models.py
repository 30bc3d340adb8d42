"""Model builders for the five window classifiers and their exact gradients.

All variants consume a [batch x 5 x ws] window and emit 3-class logits:

* crdnn_1lstm / crdnn_2lstm:  conv1d+ReLU -> LSTM stack -> dense x2 -> softmax
* crdnn_bilstm:               conv -> LSTM -> BiLSTM -> dense x2 -> softmax
* crdnn_2lstm_sae:            conv -> squeeze-excite -> 2 LSTM -> dense x2
* lstm_fcn:                   three conv/BN/ReLU blocks with squeeze-excite
                              after blocks 1 and 2, global average pooling,
                              parallel 8-unit LSTM on the dimension-shuffled
                              input, concatenated into the softmax layer.

Models are immutable during forward/inference and may be shared across
concurrent readers; training mutates a model exclusively.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..core import N_CHANNELS, NormStats
from ..errors import NonPositiveWeight, ShapeMismatch, UnsupportedSpec
from . import autodiff as ad
from .autodiff import Tensor

VARIANTS = ("crdnn_1lstm", "crdnn_2lstm", "crdnn_bilstm", "crdnn_2lstm_sae", "lstm_fcn")

#: Gate ordering inside every LSTM kernel/bias, fixed for serialization.
GATE_ORDER = "ifgo"


@dataclass(frozen=True)
class ModelSpec:
    """Architecture descriptor; defaults are the production classifier sizes."""

    variant: str
    ws: int = 15
    in_channels: int = N_CHANNELS
    n_classes: int = 3
    conv_filters: int = 10
    kernel_size: int = 5
    rnn_units: int = 32
    dense_units: int = 32
    se_reduction: int = 16
    fcn_filters: tuple[int, int, int] = (128, 256, 128)
    fcn_kernels: tuple[int, int, int] = (8, 5, 3)
    fcn_lstm_units: int = 8

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise UnsupportedSpec(f"unknown variant {self.variant!r}")
        if self.ws < 1 or self.in_channels < 1 or self.n_classes < 2:
            raise UnsupportedSpec("ws/in_channels/n_classes out of range")
        if self.variant != "lstm_fcn" and self.kernel_size > self.ws:
            raise UnsupportedSpec("conv kernel longer than the window")


@dataclass
class Param:
    """One named parameter tensor with its training metadata."""

    name: str
    data: np.ndarray
    trainable: bool = True
    lr_multiplier: float = 1.0
    weight_matrix: bool = True  # L2 applies only to weight matrices


@dataclass
class Model:
    spec: ModelSpec
    params: dict[str, Param]
    buffers: dict[str, np.ndarray] = field(default_factory=dict)
    norm_stats: NormStats | None = None

    @property
    def dtype(self):
        return next(iter(self.params.values())).data.dtype

    def clone(self) -> "Model":
        return Model(
            spec=self.spec,
            params={
                n: Param(p.name, p.data.copy(), p.trainable, p.lr_multiplier, p.weight_matrix)
                for n, p in self.params.items()
            },
            buffers={n: b.copy() for n, b in self.buffers.items()},
            norm_stats=self.norm_stats,
        )

    def snapshot(self) -> tuple[dict, dict]:
        return (
            {n: p.data.copy() for n, p in self.params.items()},
            {n: b.copy() for n, b in self.buffers.items()},
        )

    def restore(self, snap: tuple[dict, dict]) -> None:
        pdata, bdata = snap
        for n, arr in pdata.items():
            self.params[n].data = arr.copy()
        for n, arr in bdata.items():
            self.buffers[n] = arr.copy()


@dataclass(frozen=True)
class Batch:
    """One training/inference batch: x [b x 5 x ws], y [b] labels."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if self.x.ndim != 3 or self.x.shape[0] < 1:
            raise ShapeMismatch("batch x must be [b x channels x ws], b >= 1")
        if self.y.shape != (self.x.shape[0],):
            raise ShapeMismatch("batch y must have one label per window")
        if not np.all((self.y >= 0) & (self.y <= 2)):
            raise ShapeMismatch("labels must be in {0,1,2}")


def head_param(name: str) -> bool:
    """Dense-stack parameters: the part FTF keeps trainable."""
    return name.startswith(("dense", "out"))


# -- construction -------------------------------------------------------------

def _glorot(rng: np.random.Generator, shape, fan_in: int, fan_out: int, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class _Builder:
    def __init__(self, seed: int, dtype):
        self.rng = np.random.default_rng(seed)
        self.dtype = dtype
        self.params: dict[str, Param] = {}

    def matrix(self, name: str, n_in: int, n_out: int):
        data = _glorot(self.rng, (n_in, n_out), n_in, n_out, self.dtype)
        self.params[name] = Param(name, data)

    def conv(self, name: str, filters: int, channels: int, kernel: int):
        data = _glorot(
            self.rng, (filters, channels, kernel), channels * kernel, filters * kernel, self.dtype
        )
        self.params[name] = Param(name, data)

    def bias(self, name: str, n: int):
        self.params[name] = Param(name, np.zeros(n, dtype=self.dtype), weight_matrix=False)

    def const(self, name: str, value: np.ndarray):
        self.params[name] = Param(name, value.astype(self.dtype), weight_matrix=False)

    def lstm(self, prefix: str, n_in: int, units: int):
        self.matrix(f"{prefix}.kernel", n_in, 4 * units)
        self.matrix(f"{prefix}.recurrent", units, 4 * units)
        self.bias(f"{prefix}.bias", 4 * units)

    def se(self, prefix: str, channels: int, reduction: int):
        r = max(channels // reduction, 1)
        self.matrix(f"{prefix}.fc1.w", channels, r)
        self.bias(f"{prefix}.fc1.b", r)
        self.matrix(f"{prefix}.fc2.w", r, channels)
        self.bias(f"{prefix}.fc2.b", channels)

    def bn(self, prefix: str, channels: int):
        self.const(f"{prefix}.gamma", np.ones(channels))
        self.bias(f"{prefix}.beta", channels)


def _fcn_kernels(spec: ModelSpec) -> tuple[int, ...]:
    # Short windows: clamp FCN kernels to the window length.
    return tuple(min(k, spec.ws) for k in spec.fcn_kernels)


def build_model(spec: ModelSpec, seed: int, dtype=np.float32) -> Model:
    """Deterministically initialized model: Glorot-uniform matrices, zero biases."""
    b = _Builder(seed, dtype)
    buffers: dict[str, np.ndarray] = {}
    if spec.variant == "lstm_fcn":
        f_prev = spec.in_channels
        for i, (f, k) in enumerate(zip(spec.fcn_filters, _fcn_kernels(spec)), start=1):
            # no conv bias: the following batch norm would absorb it
            b.conv(f"block{i}.conv.w", f, f_prev, k)
            b.bn(f"block{i}.bn", f)
            buffers[f"block{i}.bn.running_mean"] = np.zeros(f, dtype=dtype)
            buffers[f"block{i}.bn.running_var"] = np.ones(f, dtype=dtype)
            if i < 3:
                b.se(f"block{i}.se", f, spec.se_reduction)
            f_prev = f
        b.lstm("lstm", spec.ws, spec.fcn_lstm_units)
        b.matrix("out.w", spec.fcn_filters[-1] + spec.fcn_lstm_units, spec.n_classes)
        b.bias("out.b", spec.n_classes)
    else:
        u, d = spec.rnn_units, spec.dense_units
        b.conv("conv.w", spec.conv_filters, spec.in_channels, spec.kernel_size)
        b.bias("conv.b", spec.conv_filters)
        if spec.variant == "crdnn_2lstm_sae":
            b.se("se", spec.conv_filters, spec.se_reduction)
        b.lstm("lstm1", spec.conv_filters, u)
        if spec.variant in ("crdnn_2lstm", "crdnn_2lstm_sae"):
            b.lstm("lstm2", u, u)
            feat = u
        elif spec.variant == "crdnn_bilstm":
            b.lstm("bilstm.fw", u, u)
            b.lstm("bilstm.bw", u, u)
            feat = 2 * u
        else:
            feat = u
        b.matrix("dense1.w", feat, d)
        b.bias("dense1.b", d)
        b.matrix("dense2.w", d, d)
        b.bias("dense2.b", d)
        b.matrix("out.w", d, spec.n_classes)
        b.bias("out.b", spec.n_classes)
    return Model(spec=spec, params=b.params, buffers=buffers)


def count_params(model: Model, which: str = "all") -> int:
    """Sum of parameter tensor sizes; buffers (BN running stats) excluded."""
    if which not in ("all", "trainable", "frozen"):
        raise ValueError(f"unknown filter {which!r}")
    n = 0
    for p in model.params.values():
        if which == "trainable" and not p.trainable:
            continue
        if which == "frozen" and p.trainable:
            continue
        n += int(np.prod(p.data.shape))
    return n


# -- forward graph ------------------------------------------------------------

_BN_EPS = 1e-3
_BN_MOMENTUM = 0.99


def _wrap_params(model: Model, with_grads: bool) -> dict[str, Tensor]:
    return {
        n: Tensor(p.data, requires_grad=with_grads and p.trainable)
        for n, p in model.params.items()
    }


def _lstm_layer(x_seq: Tensor, P: dict[str, Tensor], prefix: str) -> Tensor:
    """x_seq [b x T x in] -> all hidden states [b x T x u]."""
    xp = ad.add(ad.matmul(x_seq, P[f"{prefix}.kernel"]), P[f"{prefix}.bias"])
    return ad.lstm_sequence(xp, P[f"{prefix}.recurrent"])


def _last_step(h_seq: Tensor) -> Tensor:
    T = h_seq.shape[1]
    return ad.index(h_seq, (slice(None), T - 1, slice(None)))


def _dense(P: dict[str, Tensor], prefix: str, x: Tensor) -> Tensor:
    return ad.add(ad.matmul(x, P[f"{prefix}.w"]), P[f"{prefix}.b"])


def _se_block(P: dict[str, Tensor], prefix: str, h: Tensor) -> Tensor:
    # channel recalibration; output shape equals input shape
    squeezed = ad.mean(h, axis=2)
    e = ad.relu(_dense(P, f"{prefix}.fc1", squeezed))
    a = ad.sigmoid(_dense(P, f"{prefix}.fc2", e))
    b, c = a.shape
    return ad.mul(h, ad.reshape(a, (b, c, 1)))


def _batchnorm(
    model: Model, P: dict[str, Tensor], prefix: str, h: Tensor, training: bool
) -> Tensor:
    channels = model.params[f"{prefix}.gamma"].data.shape[0]
    gamma = ad.reshape(P[f"{prefix}.gamma"], (1, channels, 1))
    beta = ad.reshape(P[f"{prefix}.beta"], (1, channels, 1))
    if training:
        mu = ad.mean(h, axis=(0, 2), keepdims=True)
        xc = ad.sub(h, mu)
        var = ad.mean(ad.mul(xc, xc), axis=(0, 2), keepdims=True)
        m = _BN_MOMENTUM
        rm, rv = model.buffers[f"{prefix}.running_mean"], model.buffers[f"{prefix}.running_var"]
        model.buffers[f"{prefix}.running_mean"] = (m * rm + (1 - m) * mu.data.reshape(-1)).astype(rm.dtype)
        model.buffers[f"{prefix}.running_var"] = (m * rv + (1 - m) * var.data.reshape(-1)).astype(rv.dtype)
        xhat = ad.mul(xc, ad.power(ad.add(var, _BN_EPS), -0.5))
    else:
        rm = model.buffers[f"{prefix}.running_mean"].reshape(1, channels, 1)
        rv = model.buffers[f"{prefix}.running_var"].reshape(1, channels, 1)
        xhat = ad.mul(ad.sub(h, rm), 1.0 / np.sqrt(rv + _BN_EPS))
    return ad.add(ad.mul(xhat, gamma), beta)


def _crdnn_features(model: Model, P: dict[str, Tensor], x: Tensor) -> Tensor:
    spec = model.spec
    h = ad.relu(ad.conv1d(x, P["conv.w"], P["conv.b"]))
    if spec.variant == "crdnn_2lstm_sae":
        h = _se_block(P, "se", h)
    seq = ad.transpose(h, (0, 2, 1))  # [b x T x filters]
    hs = _lstm_layer(seq, P, "lstm1")
    if spec.variant in ("crdnn_2lstm", "crdnn_2lstm_sae"):
        return _last_step(_lstm_layer(hs, P, "lstm2"))
    if spec.variant == "crdnn_bilstm":
        fw = _lstm_layer(hs, P, "bilstm.fw")
        bw = _lstm_layer(ad.flip(hs, 1), P, "bilstm.bw")
        return ad.concat([_last_step(fw), _last_step(bw)], axis=1)
    return _last_step(hs)


def _lstm_fcn_logits(
    model: Model, P: dict[str, Tensor], x: Tensor, training: bool
) -> Tensor:
    h = x
    for i in range(1, 4):
        w = P[f"block{i}.conv.w"]
        h = ad.conv1d(h, w, Tensor(np.zeros(w.shape[0], dtype=model.dtype)))
        h = _batchnorm(model, P, f"block{i}.bn", h, training)
        h = ad.relu(h)
        if i < 3:
            h = _se_block(P, f"block{i}.se", h)
    gap = ad.mean(h, axis=2)
    # dimension shuffle: the LSTM walks the 5 channels, each step sees all ws samples
    hs = _lstm_layer(x, P, "lstm")
    feat = ad.concat([gap, _last_step(hs)], axis=1)
    return _dense(P, "out", feat)


def logits_graph(
    model: Model, x: np.ndarray, training: bool = False, with_grads: bool = False
) -> tuple[Tensor, dict[str, Tensor]]:
    """Build the forward graph; returns (logits, parameter tensors by name)."""
    spec = model.spec
    if x.ndim != 3 or x.shape[1] != spec.in_channels or x.shape[2] != spec.ws:
        raise ShapeMismatch(
            f"expected [b x {spec.in_channels} x {spec.ws}] input, got {x.shape}"
        )
    P = _wrap_params(model, with_grads)
    xt = Tensor(np.asarray(x, dtype=model.dtype))
    if spec.variant == "lstm_fcn":
        logits = _lstm_fcn_logits(model, P, xt, training)
    else:
        feat = _crdnn_features(model, P, xt)
        d = ad.relu(_dense(P, "dense1", feat))
        d = ad.relu(_dense(P, "dense2", d))
        logits = _dense(P, "out", d)
    return logits, P


def forward(model: Model, batch) -> np.ndarray:
    """Class probabilities [b x 3]; rows sum to 1 within 1e-6."""
    x = batch.x if isinstance(batch, Batch) else batch
    logits, _ = logits_graph(model, x, training=False, with_grads=False)
    return ad.softmax(logits.data)


def predict(model: Model, x: np.ndarray) -> np.ndarray:
    return forward(model, x).argmax(axis=1)


def _check_class_weights(class_weights) -> np.ndarray:
    w = np.asarray(class_weights, dtype=np.float64)
    if w.shape != (3,) or np.any(w <= 0):
        raise NonPositiveWeight(f"class weights must be 3 positive reals, got {class_weights}")
    return w


def compute_loss(
    model: Model,
    batch: Batch,
    class_weights=(1.0, 1.0, 1.0),
    l2_lambda: float = 0.0,
    training: bool = True,
) -> float:
    """Loss value only (no gradients); same quantity loss_and_grads reports."""
    w = _check_class_weights(class_weights)
    logits, _ = logits_graph(model, batch.x, training=training, with_grads=False)
    loss = ad.softmax_cross_entropy(logits, batch.y, w)
    return float(loss.data) + _l2_penalty(model, l2_lambda)


def _l2_penalty(model: Model, l2_lambda: float) -> float:
    if l2_lambda == 0.0:
        return 0.0
    acc = 0.0
    for p in model.params.values():
        if p.trainable and p.weight_matrix:
            acc += float(np.sum(p.data.astype(np.float64) ** 2))
    return l2_lambda * acc


def loss_and_grads(
    model: Model,
    batch: Batch,
    class_weights=(1.0, 1.0, 1.0),
    l2_lambda: float = 0.0,
    training: bool = True,
) -> tuple[float, dict[str, np.ndarray]]:
    """Weighted cross-entropy (+ L2 on trainable weight matrices) and exact grads.

    Gradient entries exist for trainable tensors only; frozen tensors are
    never touched.
    """
    w = _check_class_weights(class_weights)
    logits, P = logits_graph(model, batch.x, training=training, with_grads=True)
    loss = ad.softmax_cross_entropy(logits, batch.y, w)
    loss.backward()
    grads: dict[str, np.ndarray] = {}
    for name, p in model.params.items():
        if not p.trainable:
            continue
        g = P[name].grad
        if g is None:
            g = np.zeros_like(p.data)
        if l2_lambda != 0.0 and p.weight_matrix:
            g = g + (2.0 * l2_lambda) * p.data
        grads[name] = g
    return float(loss.data) + _l2_penalty(model, l2_lambda), grads


# -- standalone layer ops ------------------------------------------------------

def conv1d_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Same-padded cross-correlation along time followed by ReLU.

    Accepts [channels x T] or [batch x channels x T]; kernel must not
    exceed T.
    """
    x = np.asarray(x)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or weights.ndim != 3 or x.shape[1] != weights.shape[1]:
        raise ShapeMismatch("conv1d_forward expects x [b x C x T] and weights [F x C x K]")
    if weights.shape[2] > x.shape[2]:
        raise ShapeMismatch("kernel longer than the time axis")
    out = ad.relu(ad.conv1d(Tensor(x), Tensor(weights), Tensor(bias))).data
    return out[0] if single else out


def lstm_cell_step(x_t, h_prev, c_prev, weights) -> tuple[np.ndarray, np.ndarray]:
    """One LSTM step: gates (i,f,g,o), c = f*c_prev + i*g, h = o*tanh(c).

    weights is (kernel [in x 4u], recurrent [u x 4u], bias [4u]).
    """
    kernel, recurrent, bias = (np.asarray(a) for a in weights)
    x_t, h_prev, c_prev = np.atleast_2d(x_t), np.atleast_2d(h_prev), np.atleast_2d(c_prev)
    u = recurrent.shape[0]
    if kernel.shape[1] != 4 * u or recurrent.shape != (u, 4 * u) or bias.shape != (4 * u,):
        raise ShapeMismatch("LSTM weight shapes inconsistent with unit count")
    if x_t.shape[1] != kernel.shape[0] or h_prev.shape[1] != u or c_prev.shape[1] != u:
        raise ShapeMismatch("LSTM state shapes inconsistent with unit count")
    pre = x_t @ kernel + h_prev @ recurrent + bias
    sig = lambda a: 0.5 * (np.tanh(0.5 * a) + 1.0)
    i, f = sig(pre[:, :u]), sig(pre[:, u : 2 * u])
    g, o = np.tanh(pre[:, 2 * u : 3 * u]), sig(pre[:, 3 * u : 4 * u])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c


def scale_spec_for_gradcheck(spec: ModelSpec) -> ModelSpec:
    """Down-scaled twin of a spec (unit counts <= 8) for finite-difference checks."""
    return replace(
        spec,
        conv_filters=min(spec.conv_filters, 4),
        rnn_units=min(spec.rnn_units, 4),
        dense_units=min(spec.dense_units, 4),
        se_reduction=2,
        fcn_filters=tuple(min(f, 4) for f in spec.fcn_filters),
        fcn_lstm_units=min(spec.fcn_lstm_units, 4),
    )
