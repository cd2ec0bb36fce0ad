"""
Elementwise and structural tensor ops
=====================================

ReLU, channel concatenation / split and elementwise addition, each with the
gradient rule the network backward pass needs.
"""

from typing import Tuple

import numpy as np

from dnirb.core.tensor import Tensor
from dnirb.errors import ShapeMismatchError


def relu_forward(input: Tensor) -> Tensor:
    return Tensor(np.maximum(input.data, 0.0))


def relu_backward(input: Tensor, grad_out: Tensor) -> Tensor:
    """Pass grad_out where input > 0, zero elsewhere (including the kink)"""
    if grad_out.shape != input.shape:
        raise ShapeMismatchError("relu_backward", input.shape, grad_out.shape)
    return Tensor(np.where(input.data > 0.0, grad_out.data, 0.0))


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    """Stack b's channels after a's; n, h and w must agree"""
    if (a.n, a.h, a.w) != (b.n, b.h, b.w):
        raise ShapeMismatchError("concat_channels", (a.n, "*", a.h, a.w), b.shape, detail="n, h, w must match")
    return Tensor(np.concatenate([a.data, b.data], axis=1))


def split_channels(t: Tensor, at: int) -> Tuple[Tensor, Tensor]:
    """Inverse of concat_channels: channels [0, at) and [at, c)"""
    if not 0 < at < t.c:
        raise ShapeMismatchError("split_channels", (f"0 < at < {t.c}",), (at,))
    return Tensor(t.data[:, :at].copy()), Tensor(t.data[:, at:].copy())


def add_elementwise(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; the gradient flows unchanged to both inputs"""
    if a.shape != b.shape:
        raise ShapeMismatchError("add_elementwise", a.shape, b.shape)
    return Tensor(a.data + b.data)
