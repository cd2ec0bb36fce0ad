"""Minimal float64 tensor engine: Tensor, convolution and the layer ops built on it."""

from dnirb.core.conv import ConvGrads, ConvParams, conv2d_backward, conv2d_forward, conv2d_reference
from dnirb.core.layers import (
    add_elementwise,
    concat_channels,
    relu_backward,
    relu_forward,
    split_channels,
)
from dnirb.core.tensor import Tensor

__all__ = [
    "Tensor",
    "ConvParams",
    "ConvGrads",
    "conv2d_forward",
    "conv2d_backward",
    "conv2d_reference",
    "relu_forward",
    "relu_backward",
    "concat_channels",
    "split_channels",
    "add_elementwise",
]
