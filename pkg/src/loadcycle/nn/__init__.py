"""Neural-network layer zoo with exact reverse-mode gradients."""

from .autodiff import Tensor, softmax
from .models import (
    Batch,
    Model,
    ModelSpec,
    Param,
    VARIANTS,
    build_model,
    compute_loss,
    conv1d_forward,
    count_params,
    forward,
    head_param,
    loss_and_grads,
    lstm_cell_step,
    predict,
    scale_spec_for_gradcheck,
)
from .serialize import load_model, save_model

__all__ = [
    "Batch",
    "Model",
    "ModelSpec",
    "Param",
    "Tensor",
    "VARIANTS",
    "build_model",
    "compute_loss",
    "conv1d_forward",
    "count_params",
    "forward",
    "head_param",
    "load_model",
    "loss_and_grads",
    "lstm_cell_step",
    "predict",
    "save_model",
    "scale_spec_for_gradcheck",
    "softmax",
]
