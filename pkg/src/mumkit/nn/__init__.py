"""Minimal layers with manual backward, Adam, gradient checking and checkpoints."""

from mumkit.nn.checkpoint import load_checkpoint, save_checkpoint
from mumkit.nn.gradcheck import GradcheckReport, gradcheck
from mumkit.nn.layers import (
    BatchNormLayer,
    ConvLayer,
    bn_backward,
    bn_forward,
    bn_forward_eval,
    bn_forward_train,
    conv_backward,
    conv_forward,
    mse_backward,
    mse_forward,
    relu_backward,
    relu_forward,
    upsample_nearest_backward,
    upsample_nearest_forward,
)
from mumkit.nn.optim import AdamState, adam_step

__all__ = [
    "ConvLayer",
    "BatchNormLayer",
    "conv_forward",
    "conv_backward",
    "bn_forward",
    "bn_forward_train",
    "bn_forward_eval",
    "bn_backward",
    "relu_forward",
    "relu_backward",
    "upsample_nearest_forward",
    "upsample_nearest_backward",
    "mse_forward",
    "mse_backward",
    "AdamState",
    "adam_step",
    "GradcheckReport",
    "gradcheck",
    "save_checkpoint",
    "load_checkpoint",
]
