"""Minimal tensor/layer/optimizer machinery for building CTNet from scratch."""

from .layers import (
    BatchNorm,
    Conv1d,
    Conv2d,
    Dense,
    Dropout,
    LeakyReLU,
    MaxOverTime,
    Parameter,
    ReLU,
    Reshape,
    ResidualBlock,
    Sigmoid,
    Upsample2x,
)
from .network import LayerSpec, Network, build_layer
from .optim import AdamState, adam_step, dropout_apply
from .gradcheck import grad_check

__all__ = [
    "AdamState",
    "BatchNorm",
    "Conv1d",
    "Conv2d",
    "Dense",
    "Dropout",
    "LayerSpec",
    "LeakyReLU",
    "MaxOverTime",
    "Network",
    "Parameter",
    "ReLU",
    "Reshape",
    "ResidualBlock",
    "Sigmoid",
    "Upsample2x",
    "adam_step",
    "build_layer",
    "dropout_apply",
    "grad_check",
]
