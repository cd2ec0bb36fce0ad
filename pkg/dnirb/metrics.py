"""
Image quality metrics in normalised [0, 1] units.
"""

import math
from typing import Union

import numpy as np

from dnirb.core import Tensor
from dnirb.errors import ShapeMismatchError

ArrayLike = Union[Tensor, np.ndarray]


def _values(x: ArrayLike) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def mean_squared_error(a: ArrayLike, b: ArrayLike) -> float:
    a_values, b_values = _values(a), _values(b)
    if a_values.shape != b_values.shape:
        raise ShapeMismatchError("mean_squared_error", a_values.shape, b_values.shape)
    return float(np.mean(np.square(a_values - b_values)))


def psnr(a: ArrayLike, b: ArrayLike) -> float:
    """10*log10(1 / MSE); identical inputs give math.inf"""
    mse = mean_squared_error(a, b)
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)
