"""Y-cycle working-state recognition for wheel loaders.

Windowed 5-channel telemetry at 5 Hz, from-scratch CRDNN / LSTM-FCN
classifiers with exact reverse-mode gradients, Adam training with early
stopping, three on-site transfer-learning regimes, a synthetic Y-cycle
generator, and an ECU-emulating network service with a labeling UI
protocol.
"""

from .core import (
    CHANNELS,
    DT,
    SAMPLE_RATE_HZ,
    ConfusionMatrix,
    LabeledSequence,
    NormStats,
    Origin,
    TelemetryFrame,
    Window,
    WindowConfig,
    WindowSet,
    WorkState,
    apply_normalizer,
    confusion,
    cross_confusion_guard,
    fit_normalizer,
    label_majority,
    label_tail,
    micro_f1,
    segment,
    segment_all,
)
from .nn import Batch, Model, ModelSpec, build_model, count_params, forward, load_model, save_model
from .train import (
    AdamState,
    EarlyStopper,
    ExperimentReport,
    Metrics,
    TrainConfig,
    TrainReport,
    adam_step,
    apply_mode,
    evaluate,
    grad_check,
    run_experiment,
    train,
)
from .synth import DomainParams, generate_cycle, generate_dataset, generate_preset

__version__ = "0.1.0"
