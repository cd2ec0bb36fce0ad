"""
Same-padding 2-D convolution
============================

Stride-1, zero "same" padding cross-correlation with exact gradients:
1. conv2d_forward   - sliding-window view + tensordot (im2col + GEMM) in row slabs
2. conv2d_backward  - gradients for input, weights and bias
3. conv2d_reference - direct nested-loop oracle kept for verification
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from dnirb.core.tensor import Tensor
from dnirb.errors import ChannelMismatchError, ConfigurationError, ShapeMismatchError

logger = logging.getLogger(__name__)

# cap on the unfolded patch matrix materialised per GEMM
IM2COL_BUDGET_BYTES = 64 * 2**20


@dataclass
class ConvParams:
    """Weights (c_out, c_in, k, k) and bias (c_out,) of one convolution"""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 4 or self.weights.shape[2] != self.weights.shape[3]:
            raise ConfigurationError(f"conv weights must be (c_out, c_in, k, k), got {self.weights.shape}")
        if self.weights.shape[2] % 2 == 0:
            raise ConfigurationError(f"kernel size must be odd, got {self.weights.shape[2]}")
        if self.bias.shape != (self.weights.shape[0],):
            raise ConfigurationError(
                f"bias must have shape ({self.weights.shape[0]},), got {self.bias.shape}"
            )

    @classmethod
    def zeros(cls, c_out: int, c_in: int, kernel_size: int) -> "ConvParams":
        return cls(np.zeros((c_out, c_in, kernel_size, kernel_size)), np.zeros(c_out))

    @property
    def c_out(self) -> int:
        return self.weights.shape[0]

    @property
    def c_in(self) -> int:
        return self.weights.shape[1]

    @property
    def kernel_size(self) -> int:
        return self.weights.shape[2]

    @property
    def padding(self) -> int:
        return (self.kernel_size - 1) // 2

    @property
    def parameter_count(self) -> int:
        return self.weights.size + self.bias.size

    def copy(self) -> "ConvParams":
        return ConvParams(self.weights.copy(), self.bias.copy())


@dataclass
class ConvGrads:
    """Gradients matching a ConvParams layout"""

    weights: np.ndarray
    bias: np.ndarray

    def __add__(self, other: "ConvGrads") -> "ConvGrads":
        return ConvGrads(self.weights + other.weights, self.bias + other.bias)


def _pad(array: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return array
    return np.pad(array, ((0, 0), (0, 0), (padding, padding), (padding, padding)), mode="constant")


def _windows(padded: np.ndarray, kernel_size: int) -> np.ndarray:
    # (n, c, h, w, k, k) view onto the padded input
    return sliding_window_view(padded, (kernel_size, kernel_size), axis=(2, 3))


def _row_slabs(n: int, c: int, h: int, w: int, kernel_size: int):
    """Output row ranges whose im2col buffer stays under IM2COL_BUDGET_BYTES"""
    row_bytes = n * c * w * kernel_size * kernel_size * 8
    rows = max(1, IM2COL_BUDGET_BYTES // max(row_bytes, 1))
    for start in range(0, h, rows):
        yield start, min(h, start + rows)


def _correlate(windows: np.ndarray, kernel: np.ndarray, kernel_axes: Tuple[int, int, int], c_out: int) -> np.ndarray:
    # windows: (n, c, h, w, k, k); contracts c, k, k against kernel_axes, slab by slab
    n, c, h, w, k, _ = windows.shape
    out = np.empty((n, c_out, h, w))
    for start, stop in _row_slabs(n, c, h, w, k):
        slab = np.tensordot(windows[:, :, start:stop], kernel, axes=([1, 4, 5], list(kernel_axes)))
        out[:, :, start:stop] = slab.transpose(0, 3, 1, 2)
    return out


def conv2d_forward(input: Tensor, params: ConvParams) -> Tensor:
    """Zero-padded cross-correlation plus bias; output keeps (h, w)"""
    if input.c != params.c_in:
        raise ChannelMismatchError("conv2d_forward", params.c_in, input.c)
    windows = _windows(_pad(input.data, params.padding), params.kernel_size)
    out = _correlate(windows, params.weights, (1, 2, 3), params.c_out)
    out += params.bias[np.newaxis, :, np.newaxis, np.newaxis]
    return Tensor(out)


def conv2d_backward(input: Tensor, params: ConvParams, grad_out: Tensor) -> Tuple[Tensor, ConvGrads]:
    """
    Chain-rule gradients of a scalar loss through conv2d_forward.

    Returns (grad_input, ConvGrads(weights, bias)). The input gradient is the
    full correlation of grad_out with the flipped, channel-swapped kernel.
    """
    expected = (input.n, params.c_out, input.h, input.w)
    if input.c != params.c_in:
        raise ChannelMismatchError("conv2d_backward", params.c_in, input.c)
    if grad_out.shape != expected:
        raise ShapeMismatchError("conv2d_backward", expected, grad_out.shape, detail="grad_out")

    k = params.kernel_size
    g = grad_out.data
    windows = _windows(_pad(input.data, params.padding), k)
    grad_weights = np.zeros_like(params.weights)
    for start, stop in _row_slabs(input.n, input.c, input.h, input.w, k):
        grad_weights += np.tensordot(g[:, :, start:stop], windows[:, :, start:stop], axes=([0, 2, 3], [0, 2, 3]))
    grad_bias = g.sum(axis=(0, 2, 3))

    grad_windows = _windows(_pad(g, params.padding), k)
    flipped = params.weights[:, :, ::-1, ::-1]
    grad_input = _correlate(grad_windows, flipped, (0, 2, 3), params.c_in)

    return Tensor(grad_input), ConvGrads(grad_weights, grad_bias)


def conv2d_reference(input: Tensor, params: ConvParams) -> Tensor:
    """Direct nested-loop convolution used as a correctness oracle"""
    if input.c != params.c_in:
        raise ChannelMismatchError("conv2d_reference", params.c_in, input.c)
    n, _, h, w = input.shape
    k, p = params.kernel_size, params.padding
    padded = _pad(input.data, p)
    out = np.zeros((n, params.c_out, h, w))
    for b in range(n):
        for o in range(params.c_out):
            for i in range(h):
                for j in range(w):
                    acc = params.bias[o]
                    for di in range(k):
                        for dj in range(k):
                            acc += np.dot(padded[b, :, i + di, j + dj], params.weights[o, :, di, dj])
                    out[b, o, i, j] = acc
    return Tensor(out)
