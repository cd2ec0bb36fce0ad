"""Tests for the immutable Tensor type."""

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from dnirb.core import Tensor
from dnirb.errors import ShapeMismatchError


class TestTensor:
    def test_shape_accessors(self):
        t = Tensor.zeros((2, 3, 4, 5))
        assert (t.n, t.c, t.h, t.w) == (2, 3, 4, 5)
        assert t.size == 120
        assert t.data.dtype == np.float64

    def test_rank_must_be_four(self):
        with pytest.raises(ShapeMismatchError):
            Tensor(np.zeros((3, 3)))

    def test_zero_dims_rejected(self):
        with pytest.raises(ShapeMismatchError):
            Tensor(np.zeros((1, 0, 8, 8)))

    def test_data_is_read_only(self):
        t = Tensor.from_array(np.ones((1, 1, 2, 2)))
        with pytest.raises(ValueError):
            t.data[0, 0, 0, 0] = 5.0

    def test_from_array_copies(self):
        source = np.arange(4.0).reshape(2, 2)
        t = Tensor.from_array(source)
        source[0, 0] = 99.0
        assert t.shape == (1, 1, 2, 2)
        assert t.data[0, 0, 0, 0] == 0.0

    def test_constructor_leaves_caller_array_alone(self):
        source = np.ones((1, 1, 2, 2))
        view = source[:, :, :1]
        t = Tensor(source)
        assert source.flags.writeable
        view[...] = 7.0
        assert_array_equal(t.data, np.ones((1, 1, 2, 2)))

    def test_numpy_returns_writable_copy(self):
        t = Tensor.from_array(np.ones((1, 1, 2, 2)))
        copy = t.numpy()
        copy[...] = 0.0
        assert_array_equal(t.data, np.ones((1, 1, 2, 2)))

    def test_image_requires_single_channel(self):
        with pytest.raises(ShapeMismatchError):
            Tensor.zeros((1, 2, 3, 3)).image()
        assert Tensor.zeros((2, 1, 3, 4)).image(1).shape == (3, 4)
