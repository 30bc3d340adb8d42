"""Domain types, sliding-window segmentation, labeling rules, normalization and metrics.

Everything in this module is a pure function over immutable-by-convention
inputs (numpy arrays are never mutated in place); it is safe to call from
any number of concurrent callers.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    BadTail,
    EmptyDataset,
    EmptyInput,
    EmptyMatrix,
    EvenWindow,
    LengthMismatch,
    SequenceTooShort,
)

#: Fixed channel order used everywhere: arrays, windows, files, the wire.
CHANNELS = ("p_bu", "v_veh", "u_js", "p_cc", "p_bo")
N_CHANNELS = len(CHANNELS)

#: Nominal sampling: 5 Hz, 0.2 s between samples.
SAMPLE_RATE_HZ = 5.0
DT = 1.0 / SAMPLE_RATE_HZ


class WorkState(IntEnum):
    """The three working states; integer codes are fixed for serialization."""

    TRAVELING = 0
    LOADING = 1
    UNLOADING = 2


class Origin(Enum):
    """Which domain a recording belongs to."""

    SOURCE = "source_domain"
    TARGET = "target_domain"


@dataclass(frozen=True)
class TelemetryFrame:
    """One 5 Hz sample of the five sensor channels.

    u_js is clamped into [-1, 1] at construction (ingestion clamping);
    the other channels are opaque raw engineering units.
    """

    t: float
    p_bu: float
    v_veh: float
    u_js: float
    p_cc: float
    p_bo: float

    def __post_init__(self):
        if self.t < 0:
            raise ValueError(f"frame time must be non-negative, got {self.t}")
        object.__setattr__(self, "u_js", float(min(1.0, max(-1.0, self.u_js))))

    def values(self) -> np.ndarray:
        """Channel values in canonical order."""
        return np.array([getattr(self, c) for c in CHANNELS], dtype=np.float64)


@dataclass
class LabeledSequence:
    """A contiguous telemetry recording with per-sample WorkState labels.

    Stored columnar: ``channels`` is [5 x n] in canonical channel order,
    ``t`` and ``labels`` are length n.
    """

    t: np.ndarray
    channels: np.ndarray
    labels: np.ndarray
    origin: Origin = Origin.SOURCE
    cycle_id: str = ""

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.channels = np.asarray(self.channels, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n = self.t.shape[0]
        if n < 1:
            raise ValueError("sequence needs at least one frame")
        if self.channels.shape != (N_CHANNELS, n):
            raise ValueError(
                f"channels must be [{N_CHANNELS} x {n}], got {self.channels.shape}"
            )
        if self.labels.shape != (n,):
            raise ValueError("labels must match frames in length")
        if self.t[0] < 0:
            raise ValueError("t must be non-negative")
        if n > 1 and not np.all(np.diff(self.t) > 0):
            raise ValueError("t must be strictly increasing")
        if not np.all((self.labels >= 0) & (self.labels <= 2)):
            raise ValueError("labels must be in {0,1,2}")

    def __len__(self) -> int:
        return self.t.shape[0]

    @classmethod
    def from_frames(
        cls,
        frames: Sequence[TelemetryFrame],
        labels: Sequence[WorkState | int],
        origin: Origin = Origin.SOURCE,
        cycle_id: str = "",
    ) -> "LabeledSequence":
        if len(frames) != len(labels):
            raise ValueError("frames and labels must have equal length")
        t = np.array([f.t for f in frames], dtype=np.float64)
        ch = np.array([[getattr(f, c) for f in frames] for c in CHANNELS])
        lab = np.array([int(l) for l in labels], dtype=np.int64)
        return cls(t=t, channels=ch, labels=lab, origin=origin, cycle_id=cycle_id)

    def frames(self) -> Iterator[TelemetryFrame]:
        for i in range(len(self)):
            vals = {c: float(self.channels[j, i]) for j, c in enumerate(CHANNELS)}
            yield TelemetryFrame(t=float(self.t[i]), **vals)


@dataclass(frozen=True)
class WindowConfig:
    """How to cut a sequence into training windows.

    label_mode "majority" labels a window by the modal state of all its
    samples; "tail" by the modal state of the last ``tail_k`` samples
    (reduces detection delay). Canonical window lengths are 5/9/15/25.
    """

    ws: int
    stride: int = 1
    label_mode: str = "majority"
    tail_k: int = 3

    def __post_init__(self):
        if self.ws < 1 or self.ws % 2 == 0:
            raise EvenWindow(f"window length must be odd and positive, got {self.ws}")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.label_mode not in ("majority", "tail"):
            raise ValueError(f"unknown label_mode {self.label_mode!r}")
        if self.label_mode == "tail":
            if self.tail_k not in (3, 5):
                raise BadTail(f"tail length must be 3 or 5, got {self.tail_k}")
            if self.tail_k > self.ws:
                raise BadTail("tail length exceeds window length")


@dataclass(frozen=True)
class Window:
    """A single [5 x ws] float32 window with its derived label."""

    values: np.ndarray
    label: WorkState
    end_index: int

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[0] != N_CHANNELS:
            raise ValueError(f"window values must be [{N_CHANNELS} x ws]")


@dataclass
class WindowSet:
    """A batch of windows cut from one or more sequences (the training unit).

    x is [n x 5 x ws] float32 *raw* values; normalization is applied by the
    consumer (training/evaluation) so the same WindowSet can be reused with
    different normalizers.
    """

    x: np.ndarray
    y: np.ndarray
    end_index: np.ndarray
    cycle_ids: np.ndarray
    ws: int

    def __post_init__(self):
        n = self.x.shape[0]
        if self.x.ndim != 3 or self.x.shape[1] != N_CHANNELS or self.x.shape[2] != self.ws:
            raise ValueError("x must be [n x 5 x ws]")
        if self.y.shape != (n,) or self.end_index.shape != (n,) or self.cycle_ids.shape != (n,):
            raise ValueError("per-window arrays must all have length n")

    def __len__(self) -> int:
        return self.x.shape[0]

    def window(self, i: int) -> Window:
        return Window(
            values=self.x[i], label=WorkState(int(self.y[i])), end_index=int(self.end_index[i])
        )

    def subset(self, idx) -> "WindowSet":
        return WindowSet(
            x=self.x[idx], y=self.y[idx], end_index=self.end_index[idx],
            cycle_ids=self.cycle_ids[idx], ws=self.ws,
        )

    @classmethod
    def concat(cls, sets: Sequence["WindowSet"]) -> "WindowSet":
        if not sets:
            raise EmptyDataset("no window sets to concatenate")
        ws = sets[0].ws
        if any(s.ws != ws for s in sets):
            raise ValueError("window lengths differ")
        return cls(
            x=np.concatenate([s.x for s in sets]),
            y=np.concatenate([s.y for s in sets]),
            end_index=np.concatenate([s.end_index for s in sets]),
            cycle_ids=np.concatenate([s.cycle_ids for s in sets]),
            ws=ws,
        )


@dataclass
class NormStats:
    """Per-channel z-score statistics fitted on training data.

    Channels that were constant in the fit get std := 1 and are flagged.
    """

    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.constant is None:
            self.constant = np.zeros(N_CHANNELS, dtype=bool)
        self.constant = np.asarray(self.constant, dtype=bool)
        if self.mean.shape != (N_CHANNELS,) or self.std.shape != (N_CHANNELS,):
            raise ValueError("mean/std must have one entry per channel")
        if np.any(self.std <= 0):
            raise ValueError("std must be positive (constant channels get 1)")


# -- labeling rules ---------------------------------------------------------

def _modal_label(labels: np.ndarray) -> int:
    # Modal class; ties broken in favor of the class whose latest occurrence
    # is most recent (favors the newest state).
    counts = np.array([int(np.sum(labels == c)) for c in range(3)])
    best = -1
    best_key = (-1, -1)
    for c in range(3):
        occ = np.nonzero(labels == c)[0]
        last = int(occ[-1]) if occ.size else -1
        key = (counts[c], last)
        if key > best_key:
            best_key = key
            best = c
    return best


def label_majority(labels: Sequence[WorkState | int]) -> WorkState:
    """Modal label of the whole window; window length must be odd."""
    arr = np.asarray([int(l) for l in labels], dtype=np.int64)
    if arr.size % 2 == 0 or arr.size == 0:
        raise EvenWindow(f"majority labeling needs an odd window, got {arr.size}")
    return WorkState(_modal_label(arr))


def label_tail(labels: Sequence[WorkState | int], k: int) -> WorkState:
    """Modal label of the last k samples (k in {3,5}); same tie rule."""
    if k not in (3, 5):
        raise BadTail(f"tail length must be 3 or 5, got {k}")
    arr = np.asarray([int(l) for l in labels], dtype=np.int64)
    if k > arr.size:
        raise BadTail("tail length exceeds window length")
    return WorkState(_modal_label(arr[-k:]))


def _window_labels(label_windows: np.ndarray, cfg: WindowConfig) -> np.ndarray:
    # Vectorized modal labeling over [n x ws] rows with the D-1 tie rule:
    # maximize (count, last occurrence index) lexicographically.
    if cfg.label_mode == "tail":
        label_windows = label_windows[:, -cfg.tail_k:]
    n, w = label_windows.shape
    eq = label_windows[:, :, None] == np.arange(3)[None, None, :]  # [n, w, 3]
    counts = eq.sum(axis=1)
    pos = np.where(eq, np.arange(w)[None, :, None], -1)
    last = pos.max(axis=1)
    score = counts * (w + 1) + (last + 1)
    return score.argmax(axis=1).astype(np.int64)


def segment(seq: LabeledSequence, cfg: WindowConfig) -> WindowSet:
    """Cut a labeled sequence into sliding windows.

    Windows start at 0, stride, 2*stride, ...; each covers ws consecutive
    samples and is labeled per cfg.label_mode. end_index records the last
    constituent sample for delay analysis.
    """
    n = len(seq)
    if n < cfg.ws:
        raise SequenceTooShort(f"{n} frames < window length {cfg.ws}")
    starts = np.arange(0, n - cfg.ws + 1, cfg.stride)
    ch_view = np.lib.stride_tricks.sliding_window_view(seq.channels, cfg.ws, axis=1)
    x = ch_view[:, starts, :].transpose(1, 0, 2).astype(np.float32)
    lab_view = np.lib.stride_tricks.sliding_window_view(seq.labels, cfg.ws)
    y = _window_labels(lab_view[starts], cfg)
    end_index = starts + cfg.ws - 1
    cycle_ids = np.full(len(starts), seq.cycle_id, dtype=object)
    return WindowSet(x=x, y=y, end_index=end_index, cycle_ids=cycle_ids, ws=cfg.ws)


def segment_all(seqs: Iterable[LabeledSequence], cfg: WindowConfig) -> WindowSet:
    """Segment several sequences and concatenate the results."""
    sets = [segment(s, cfg) for s in seqs]
    if not sets:
        raise EmptyDataset("no sequences to segment")
    return WindowSet.concat(sets)


def detection_delays(windows: WindowSet, seq: LabeledSequence) -> np.ndarray:
    """Per-window delay: end_index minus the index where the window's label last began.

    Operationalizes the delay between a state occurring and the window method
    detecting it; only meaningful for windows cut from ``seq``.
    """
    lab = seq.labels
    onsets = np.flatnonzero(np.r_[True, lab[1:] != lab[:-1]])
    delays = np.empty(len(windows), dtype=np.int64)
    for i in range(len(windows)):
        e = int(windows.end_index[i])
        c = int(windows.y[i])
        starts = [o for o in onsets if o <= e and lab[o] == c]
        delays[i] = e - starts[-1] if starts else -1
    return delays


# -- normalization ----------------------------------------------------------

def fit_normalizer(train: Iterable[LabeledSequence]) -> NormStats:
    """Per-channel mean and population std over all training frames."""
    seqs = list(train)
    if not seqs or sum(len(s) for s in seqs) == 0:
        raise EmptyDataset("cannot fit a normalizer on an empty dataset")
    values = np.concatenate([s.channels for s in seqs], axis=1)
    return fit_normalizer_values(values)


def fit_normalizer_values(values: np.ndarray) -> NormStats:
    """Fit stats from a [5 x n] (or [n x 5 x ws]) raw value array."""
    if values.ndim == 3:
        values = values.transpose(1, 0, 2).reshape(N_CHANNELS, -1)
    if values.size == 0:
        raise EmptyDataset("cannot fit a normalizer on an empty dataset")
    mean = values.mean(axis=1)
    std = values.std(axis=1)  # population (ddof=0)
    constant = std == 0
    std = np.where(constant, 1.0, std)
    return NormStats(mean=mean, std=std, constant=constant)


def apply_normalizer(x, s: NormStats):
    """(value - mean[c]) / std[c] per channel; returns the same shape/type.

    Accepts a Window, a LabeledSequence or a WindowSet; pure function.
    """
    if isinstance(x, Window):
        vals = (x.values - s.mean[:, None]) / s.std[:, None]
        return Window(values=vals.astype(np.float32), label=x.label, end_index=x.end_index)
    if isinstance(x, LabeledSequence):
        ch = (x.channels - s.mean[:, None]) / s.std[:, None]
        return LabeledSequence(
            t=x.t, channels=ch, labels=x.labels, origin=x.origin, cycle_id=x.cycle_id
        )
    if isinstance(x, WindowSet):
        mean = s.mean.astype(np.float32)[None, :, None]
        std = s.std.astype(np.float32)[None, :, None]
        return replace(x, x=(x.x - mean) / std)
    raise TypeError(f"cannot normalize {type(x).__name__}")


# -- metrics ----------------------------------------------------------------

@dataclass(frozen=True)
class ConfusionMatrix:
    """3x3 counts; rows = ground truth e0..e2, columns = prediction."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.shape != (3, 3) or np.any(c < 0):
            raise ValueError("confusion matrix must be 3x3 non-negative")
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def per_class_precision(self) -> np.ndarray:
        col = self.counts.sum(axis=0)
        diag = np.diag(self.counts)
        return np.where(col > 0, diag / np.maximum(col, 1), 0.0)

    def per_class_recall(self) -> np.ndarray:
        row = self.counts.sum(axis=1)
        diag = np.diag(self.counts)
        return np.where(row > 0, diag / np.maximum(row, 1), 0.0)


def confusion(
    preds: Sequence[WorkState | int], truths: Sequence[WorkState | int]
) -> ConfusionMatrix:
    """counts[i][j] = number of samples with truth i predicted as j."""
    p = np.asarray([int(v) for v in preds], dtype=np.int64)
    t = np.asarray([int(v) for v in truths], dtype=np.int64)
    if p.size == 0 and t.size == 0:
        raise EmptyInput("no samples to score")
    if p.shape != t.shape:
        raise LengthMismatch(f"{p.size} predictions vs {t.size} truths")
    counts = np.zeros((3, 3), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return ConfusionMatrix(counts=counts)


def micro_f1(cm: ConfusionMatrix) -> float:
    """Micro-averaged F1.

    Computed through micro precision/recall; for single-label multiclass
    classification both equal trace/total, so the result is exactly
    accuracy (asserted).
    """
    total = cm.total
    if total == 0:
        raise EmptyMatrix("confusion matrix is empty")
    tp = int(np.trace(cm.counts))
    fp = total - tp  # sum over classes of false positives
    fn = total - tp  # and of false negatives
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    f1 = precision if precision == recall else 2 * precision * recall / (precision + recall)
    assert f1 == tp / total
    return f1


def cross_confusion_guard(cm: ConfusionMatrix) -> bool:
    """True iff the model never confuses loading and unloading (either way)."""
    return int(cm.counts[1, 2]) == 0 and int(cm.counts[2, 1]) == 0
