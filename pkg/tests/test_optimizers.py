"""Tests for the Adam and SGD optimizers."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from dnirb.errors import ConfigurationError
from dnirb.optimizers import SGD, Adam, make_optimizer


class TestSGD:
    def test_step(self):
        params = {"w": np.array([1.0, -2.0])}
        SGD(lr=0.5).step(params, {"w": np.array([2.0, 4.0])})
        assert_array_equal(params["w"], [0.0, -4.0])


class TestAdam:
    def test_first_step_moves_by_lr(self):
        params = {"w": np.array([1.0, 1.0, 1.0])}
        Adam(lr=0.01).step(params, {"w": np.array([3.0, -0.5, 1e-3])})
        assert_allclose(params["w"], [0.99, 1.01, 0.99], rtol=0, atol=1e-6)

    def test_updates_in_place(self):
        weights = np.zeros(4)
        Adam(lr=0.1).step({"w": weights}, {"w": np.ones(4)})
        assert (weights < 0).all()

    def test_zero_lr_is_a_no_op(self):
        params = {"w": np.array([0.3, -0.7])}
        adam = Adam(lr=0.0)
        for _ in range(3):
            adam.step(params, {"w": np.array([5.0, -5.0])})
        assert_array_equal(params["w"], [0.3, -0.7])
        assert adam.t == 3

    def test_minimises_quadratic(self):
        params = {"x": np.array([5.0])}
        adam = Adam(lr=0.1)
        for _ in range(500):
            adam.step(params, {"x": 2.0 * params["x"]})
        assert abs(params["x"][0]) < 0.05


class TestFactory:
    def test_names(self):
        assert isinstance(make_optimizer("Adam", 1e-3), Adam)
        assert isinstance(make_optimizer("sgd", 1e-3), SGD)

    def test_unknown(self):
        with pytest.raises(ConfigurationError):
            make_optimizer("rmsprop", 1e-3)
