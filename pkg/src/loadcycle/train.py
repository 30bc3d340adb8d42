"""Adam optimization, early-stopped training, transfer regimes and evaluation.

Regimes:
  FS  - from scratch, everything trainable;
  FTF - freeze conv/recurrent, further train only the dense stack;
  OTF - everything trainable, backbone at a reduced learning rate
        (soft weight sharing).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import (
    ConfusionMatrix,
    WindowSet,
    confusion,
    cross_confusion_guard,
    fit_normalizer_values,
    micro_f1,
)
from .errors import (
    EmptyDataset,
    MissingBaseModel,
    NoValidationCycles,
    NonPositiveWeight,
    ShapeMismatch,
)
from .nn import (
    Batch,
    Model,
    ModelSpec,
    build_model,
    compute_loss,
    count_params,
    forward,
    head_param,
    loss_and_grads,
)
from .nn.models import scale_spec_for_gradcheck

MODES = ("FS", "FTF", "OTF")
REGIMES = ("ND+FS", "ND+FTF", "ND+OTF", "ND+PD+FS")

LR_FLOOR = 1e-6
LR_DECAY_EVERY = 25  # epochs without validation improvement per halving


@dataclass
class TrainConfig:
    batch_size: int = 128
    lr0: float = 1e-4
    betas: tuple[float, float] = (0.9, 0.999)
    eps_adam: float = 1e-8
    patience: int = 100
    l2_lambda: float = 1e-4
    class_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    epochs_max: int = 1000
    mode: str = "FS"
    lr_multiplier_backbone: float = 0.1
    val_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in (0,1)")
        if any(w <= 0 for w in self.class_weights):
            raise NonPositiveWeight(f"class weights must be positive: {self.class_weights}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


@dataclass
class Metrics:
    cm: ConfusionMatrix
    micro_f1: float
    precision: np.ndarray
    recall: np.ndarray
    guard_ok: bool
    avg_test_ms_per_window: float


@dataclass
class TrainReport:
    history: list[tuple[float, float]]
    best_epoch: int
    stop_epoch: int
    wall_time_s: float
    samples_per_epoch: int
    trainable_params: int
    metrics_val: Metrics


# -- optimizer ---------------------------------------------------------------

class AdamState:
    """First/second moment accumulators, one pair per parameter tensor."""

    def __init__(self, model: Model):
        self.m = {n: np.zeros_like(p.data) for n, p in model.params.items()}
        self.v = {n: np.zeros_like(p.data) for n, p in model.params.items()}
        self.t = 0


def adam_step(
    params,
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> None:
    """One Adam update with bias correction; frozen tensors untouched.

    Effective step size per tensor is lr * tensor.lr_multiplier.
    """
    b1, b2 = betas
    state.t += 1
    t = state.t
    for name, p in params.items():
        if not p.trainable or name not in grads:
            continue
        g = grads[name]
        if g.shape != p.data.shape:
            raise ShapeMismatch(f"{name}: grad {g.shape} vs param {p.data.shape}")
        m = state.m[name] = b1 * state.m[name] + (1 - b1) * g
        v = state.v[name] = b2 * state.v[name] + (1 - b2) * (g * g)
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        p.data -= (lr * p.lr_multiplier) * m_hat / (np.sqrt(v_hat) + eps)


# -- early stopping ------------------------------------------------------------

class EarlyStopper:
    """Stop patience epochs after the best validation cost."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best_cost = np.inf
        self.best_epoch = 0

    def update(self, epoch: int, cost: float) -> bool:
        """Record an epoch's validation cost; True if it is a new best."""
        if cost < self.best_cost:
            self.best_cost = cost
            self.best_epoch = epoch
            return True
        return False

    def epochs_since_best(self, epoch: int) -> int:
        return epoch - self.best_epoch

    def should_stop(self, epoch: int) -> bool:
        return self.epochs_since_best(epoch) >= self.patience


# -- regimes -------------------------------------------------------------------

def apply_mode(model: Model, mode: str, backbone_multiplier: float = 0.1) -> Model:
    """Set trainable flags and per-layer lr multipliers for a regime."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    for name, p in model.params.items():
        head = head_param(name)
        if mode == "FS":
            p.trainable = True
            p.lr_multiplier = 1.0
        elif mode == "FTF":
            p.trainable = head
            p.lr_multiplier = 1.0
        else:  # OTF
            p.trainable = True
            p.lr_multiplier = 1.0 if head else backbone_multiplier
    return model


# -- training ------------------------------------------------------------------

def _normalized(model: Model, x: np.ndarray) -> np.ndarray:
    s = model.norm_stats
    if s is None:
        return x
    mean = s.mean.astype(np.float32)[None, :, None]
    std = s.std.astype(np.float32)[None, :, None]
    return ((x - mean) / std).astype(np.float32)


def _split_by_cycle(
    windows: WindowSet, val_fraction: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    ids = list(dict.fromkeys(windows.cycle_ids.tolist()))
    if len(ids) < 2:
        raise NoValidationCycles("need at least two cycles to split train/validation")
    order = rng.permutation(len(ids))
    n_val = int(round(val_fraction * len(ids)))
    n_val = min(max(n_val, 1), len(ids) - 1)
    val_ids = {ids[i] for i in order[:n_val]}
    val_mask = np.array([cid in val_ids for cid in windows.cycle_ids])
    return ~val_mask, val_mask


def train(
    model: Model,
    windows: WindowSet,
    cfg: TrainConfig,
    progress: Callable[[int, float, float], None] | None = None,
) -> TrainReport:
    """Early-stopped Adam training with a cycle-level validation split.

    Splits whole cycles (never windows) into train/validation to avoid
    leakage between overlapping windows; restores the best-validation
    weights at stop. If the model has no fitted normalizer yet, one is
    fitted on the training split only and stored on the model.
    """
    if len(windows) == 0:
        raise EmptyDataset("no windows to train on")
    rng = np.random.default_rng(cfg.seed)
    train_mask, val_mask = _split_by_cycle(windows, cfg.val_fraction, rng)
    tr, va = windows.subset(train_mask), windows.subset(val_mask)
    if model.norm_stats is None:
        model.norm_stats = fit_normalizer_values(tr.x)
    xtr, ytr = _normalized(model, tr.x), tr.y
    xva, yva = _normalized(model, va.x), va.y

    adam = AdamState(model)
    stopper = EarlyStopper(cfg.patience)
    lr = cfg.lr0
    best_snap = model.snapshot()
    history: list[tuple[float, float]] = []
    t0 = time.perf_counter()
    epoch = 0
    for epoch in range(1, cfg.epochs_max + 1):
        order = rng.permutation(len(tr))
        running = 0.0
        for lo in range(0, len(order), cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            loss, grads = loss_and_grads(
                model,
                Batch(xtr[idx], ytr[idx]),
                class_weights=cfg.class_weights,
                l2_lambda=cfg.l2_lambda,
                training=True,
            )
            adam_step(model.params, grads, adam, lr, cfg.betas, cfg.eps_adam)
            running += loss * len(idx)
        train_cost = running / len(tr)
        val_cost = compute_loss(
            model,
            Batch(xva, yva),
            class_weights=cfg.class_weights,
            l2_lambda=cfg.l2_lambda,
            training=False,
        )
        history.append((train_cost, val_cost))
        if stopper.update(epoch, val_cost):
            best_snap = model.snapshot()
        if progress is not None:
            progress(epoch, train_cost, val_cost)
        if stopper.should_stop(epoch):
            break
        since = stopper.epochs_since_best(epoch)
        if since > 0 and since % LR_DECAY_EVERY == 0:
            lr = max(lr * 0.5, LR_FLOOR)
    wall = time.perf_counter() - t0
    model.restore(best_snap)
    metrics = evaluate(model, va)
    return TrainReport(
        history=history,
        best_epoch=stopper.best_epoch,
        stop_epoch=epoch,
        wall_time_s=wall,
        samples_per_epoch=len(windows),
        trainable_params=count_params(model, "trainable"),
        metrics_val=metrics,
    )


def validation_cost(model: Model, windows: WindowSet, cfg: TrainConfig) -> float:
    """Validation-style cost of a model on a window set (inference mode)."""
    x = _normalized(model, windows.x)
    return compute_loss(
        model, Batch(x, windows.y), cfg.class_weights, cfg.l2_lambda, training=False
    )


def evaluate(model: Model, windows: WindowSet, timed_windows: int = 1000) -> Metrics:
    """Inference metrics plus mean single-window forward latency."""
    if len(windows) == 0:
        raise EmptyDataset("no windows to evaluate")
    x = _normalized(model, windows.x)
    preds = np.concatenate(
        [forward(model, x[lo : lo + 512]).argmax(axis=1) for lo in range(0, len(x), 512)]
    )
    cm = confusion(preds, windows.y)
    f1 = micro_f1(cm)
    latency_ms = 0.0
    if timed_windows > 0:
        n = len(x)
        t0 = time.perf_counter()
        for i in range(timed_windows):
            forward(model, x[i % n : i % n + 1])
        latency_ms = (time.perf_counter() - t0) / timed_windows * 1e3
    return Metrics(
        cm=cm,
        micro_f1=f1,
        precision=cm.per_class_precision(),
        recall=cm.per_class_recall(),
        guard_ok=cross_confusion_guard(cm),
        avg_test_ms_per_window=latency_ms,
    )


# -- gradient-check oracle -------------------------------------------------------

def grad_check(spec: ModelSpec, ws: int, seed: int, eps: float = 1e-4) -> float:
    """Max relative error between analytic and central-difference gradients.

    Builds a down-scaled 64-bit twin of the architecture and perturbs every
    trainable parameter entry by +/-eps. Entries that disagree at the
    primary step size are re-measured at eps/10 and 3*eps and the best
    agreement kept: large steps can straddle a ReLU kink, small steps hit
    the 64-bit roundoff floor on near-zero gradients, and a genuinely
    wrong gradient disagrees at every step size.
    """
    from dataclasses import replace

    if eps <= 0:
        raise ValueError("eps must be positive")
    small = scale_spec_for_gradcheck(replace(spec, ws=ws))
    model = build_model(small, seed=seed, dtype=np.float64)
    rng = np.random.default_rng(seed + 1)
    # Check at a generic point: zero-initialized biases park whole rows
    # exactly on the ReLU kink (dead layer => preactivation == bias == 0),
    # where central differences measure half the slope by construction.
    for p in model.params.values():
        if not p.weight_matrix:
            p.data = p.data + rng.uniform(-0.3, 0.3, size=p.data.shape)
    batch = Batch(
        rng.standard_normal((3, small.in_channels, ws)),
        rng.integers(0, small.n_classes, size=3),
    )
    weights = (1.0, 2.0, 0.5)
    lam = 1e-4
    _, grads = loss_and_grads(model, batch, weights, lam, training=True)

    def rel_error(flat: np.ndarray, j: int, analytic: float, step: float) -> float:
        keep = flat[j]
        flat[j] = keep + step
        up = compute_loss(model, batch, weights, lam, training=True)
        flat[j] = keep - step
        down = compute_loss(model, batch, weights, lam, training=True)
        flat[j] = keep
        numeric = (up - down) / (2 * step)
        return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)

    worst = 0.0
    for name, p in model.params.items():
        if not p.trainable:
            continue
        flat = p.data.reshape(-1)
        gflat = grads[name].reshape(-1)
        for j in range(flat.size):
            rel = rel_error(flat, j, gflat[j], eps)
            if rel > 1e-5:
                rel = min(
                    rel,
                    rel_error(flat, j, gflat[j], eps / 10),
                    rel_error(flat, j, gflat[j], 3 * eps),
                )
            worst = max(worst, rel)
    return worst


# -- the four-way experiment -----------------------------------------------------

@dataclass
class ExperimentReport:
    regime: str
    f1_nd: float
    f1_pd: float
    samples_per_epoch: int
    trainable_params: int
    training_time_s: float
    metrics_nd: Metrics = field(repr=False, default=None)  # type: ignore[assignment]
    metrics_pd: Metrics = field(repr=False, default=None)  # type: ignore[assignment]
    train_report: TrainReport = field(repr=False, default=None)  # type: ignore[assignment]
    model: Model = field(repr=False, default=None)  # type: ignore[assignment]


def run_experiment(
    regime: str,
    source: WindowSet,
    target: WindowSet,
    cfg: TrainConfig,
    base_model: Model | None = None,
    spec: ModelSpec | None = None,
    eval_source: WindowSet | None = None,
    eval_target: WindowSet | None = None,
    progress: Callable[[int, float, float], None] | None = None,
) -> ExperimentReport:
    """One row of the four-way training-method comparison.

    ND+FS trains a fresh model on the target windows, ND+FTF / ND+OTF
    fine-tune the base model, ND+PD+FS trains from scratch on
    source+target. F1 is reported on the (held-out) target and source
    evaluation sets.
    """
    regime = regime.upper().replace(" ", "")
    if regime not in REGIMES:
        raise ValueError(f"regime must be one of {REGIMES}")
    mode = "FS"
    if regime == "ND+FTF":
        mode = "FTF"
    elif regime == "ND+OTF":
        mode = "OTF"
    if mode in ("FTF", "OTF"):
        if base_model is None:
            raise MissingBaseModel(f"{regime} needs a pre-trained base model")
        model = base_model.clone()
    else:
        model_spec = spec or (base_model.spec if base_model else ModelSpec("crdnn_2lstm", ws=target.ws))
        model = build_model(model_spec, seed=cfg.seed)
    apply_mode(model, mode, cfg.lr_multiplier_backbone)
    data = target if regime != "ND+PD+FS" else WindowSet.concat([source, target])
    cfg_run = cfg if cfg.mode == mode else _with_mode(cfg, mode)
    report = train(model, data, cfg_run, progress=progress)
    metrics_nd = evaluate(model, eval_target if eval_target is not None else target)
    metrics_pd = evaluate(model, eval_source if eval_source is not None else source)
    return ExperimentReport(
        regime=regime,
        f1_nd=metrics_nd.micro_f1,
        f1_pd=metrics_pd.micro_f1,
        samples_per_epoch=report.samples_per_epoch,
        trainable_params=report.trainable_params,
        training_time_s=report.wall_time_s,
        metrics_nd=metrics_nd,
        metrics_pd=metrics_pd,
        train_report=report,
        model=model,
    )


def _with_mode(cfg: TrainConfig, mode: str) -> TrainConfig:
    from dataclasses import replace

    return replace(cfg, mode=mode)
