"""
Tensor type for DnIRB
=====================

Dense rank-4 float64 tensors in (batch, channel, height, width) order.
A Tensor wraps a read-only numpy array; ops always build new tensors.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from dnirb.errors import ShapeMismatchError


@dataclass(frozen=True, eq=False)
class Tensor:
    """Immutable (n, c, h, w) float64 tensor"""

    data: np.ndarray

    def __post_init__(self):
        # private frozen copy; the caller keeps a writable array
        array = np.array(self.data, dtype=np.float64, copy=True)
        if array.ndim != 4:
            raise ShapeMismatchError("Tensor", ("n", "c", "h", "w"), array.shape, detail="rank must be 4")
        if min(array.shape) < 1:
            raise ShapeMismatchError("Tensor", ("n>=1", "c>=1", "h>=1", "w>=1"), array.shape)
        array.setflags(write=False)
        object.__setattr__(self, "data", array)

    @classmethod
    def from_array(cls, array) -> "Tensor":
        """Copy any array-like into a new tensor; 2-D images become (1, 1, h, w)"""
        array = np.asarray(array, dtype=np.float64)
        if array.ndim == 2:
            array = array[np.newaxis, np.newaxis]
        return cls(array)

    @classmethod
    def zeros(cls, shape: Tuple[int, int, int, int]) -> "Tensor":
        return cls(np.zeros(shape, dtype=np.float64))

    @property
    def shape(self) -> Tuple[int, int, int, int]:
        return self.data.shape

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def c(self) -> int:
        return self.data.shape[1]

    @property
    def h(self) -> int:
        return self.data.shape[2]

    @property
    def w(self) -> int:
        return self.data.shape[3]

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        """Writable copy of the underlying values"""
        return self.data.copy()

    def image(self, index: int = 0) -> np.ndarray:
        """The (h, w) plane of a single-channel sample"""
        if self.c != 1:
            raise ShapeMismatchError("Tensor.image", (self.n, 1, self.h, self.w), self.shape)
        return self.data[index, 0]

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"
