"""Tests for the DnIRB block and the full network."""

import tracemalloc

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from dnirb.checkpoint import read_checkpoint_info, save_checkpoint
from dnirb.core import ConvParams, Tensor
from dnirb.errors import ChannelMismatchError, ConfigurationError
from dnirb.gradcheck import check_block, check_network
from dnirb.network import (
    DnIRBlockParams,
    NetworkConfig,
    block_forward,
    count_parameters,
    denoise,
    init_params,
    layer_layout,
    network_backward,
    network_forward,
    network_forward_cached,
    zero_params,
)


def zero_block(features=64, bottleneck=32):
    return DnIRBlockParams(
        branch_a=[ConvParams.zeros(bottleneck, features, 1), ConvParams.zeros(bottleneck, bottleneck, 3)],
        branch_b=[
            ConvParams.zeros(bottleneck, features, 1),
            ConvParams.zeros(bottleneck, bottleneck, 3),
            ConvParams.zeros(bottleneck, bottleneck, 3),
        ],
    )


class TestBlock:
    def test_zero_branches_are_identity(self, rng):
        x = Tensor(rng.standard_normal((2, 64, 6, 5)))
        assert_array_equal(block_forward(x, zero_block()).data, x.data)

    def test_shape_preserved(self, rng, one_block_params):
        x = Tensor(rng.standard_normal((1, 64, 9, 7)))
        assert block_forward(x, one_block_params.blocks[0]).shape == (1, 64, 9, 7)

    def test_wrong_width_rejected(self, rng, one_block_params):
        with pytest.raises(ChannelMismatchError):
            block_forward(Tensor(rng.standard_normal((1, 32, 4, 4))), one_block_params.blocks[0])

    def test_branch_kernels_validated(self):
        with pytest.raises(ConfigurationError):
            DnIRBlockParams(
                branch_a=[ConvParams.zeros(32, 64, 3), ConvParams.zeros(32, 32, 3)],
                branch_b=[ConvParams.zeros(32, 64, 1), ConvParams.zeros(32, 32, 3), ConvParams.zeros(32, 32, 3)],
            )

    @pytest.mark.parametrize("seed", range(5))
    def test_finite_differences(self, seed):
        result = check_block(seed, samples=20)
        assert result.passed, result.describe()


class TestParameterCount:
    def test_single_block_and_four_blocks(self):
        one = count_parameters(NetworkConfig(num_blocks=1))
        two = count_parameters(NetworkConfig(num_blocks=2))
        assert two - one == 31904
        assert one - 31904 == 40705
        assert count_parameters(NetworkConfig(num_blocks=4)) == 168321

    @pytest.mark.parametrize("blocks", [1, 2, 4, 8, 16])
    def test_matches_checkpoint_manifest(self, tmp_path, blocks):
        config = NetworkConfig(num_blocks=blocks)
        path = tmp_path / f"n{blocks}.ckpt"
        save_checkpoint(zero_params(config), path)
        assert read_checkpoint_info(path).parameter_count == count_parameters(config)

    def test_layout_order(self):
        names = [name for name, *_ in layer_layout(NetworkConfig(num_blocks=2))]
        assert names[:2] == ["stem1", "stem2"]
        assert names[2:7] == [
            "blocks.0.branch_a.0",
            "blocks.0.branch_a.1",
            "blocks.0.branch_b.0",
            "blocks.0.branch_b.1",
            "blocks.0.branch_b.2",
        ]
        assert names[-1] == "head"
        assert len(names) == 2 + 5 * 2 + 1

    @pytest.mark.parametrize("blocks", [0, -1])
    def test_block_count_must_be_positive(self, blocks):
        with pytest.raises(ConfigurationError):
            NetworkConfig(num_blocks=blocks)


class TestNetworkForward:
    @pytest.mark.parametrize("blocks", [1, 2, 4])
    @pytest.mark.parametrize("hw", [(40, 40), (64, 48)])
    def test_output_matches_input_shape(self, rng, blocks, hw):
        params = init_params(NetworkConfig(num_blocks=blocks), rng_seed=0)
        y = Tensor(rng.uniform(size=(1, 1, *hw)))
        assert network_forward(y, params).shape == (1, 1, *hw)

    @pytest.mark.slow
    def test_full_frame(self, rng):
        params = init_params(NetworkConfig(num_blocks=1), rng_seed=0)
        y = Tensor(rng.uniform(size=(1, 1, 480, 640)))
        assert network_forward(y, params).shape == (1, 1, 480, 640)

    def test_zero_network_predicts_no_noise(self, rng, zero_network):
        y = Tensor(rng.uniform(size=(2, 1, 12, 10)))
        assert not network_forward(y, zero_network).data.any()
        assert_array_equal(denoise(y, zero_network).data, y.data)

    def test_denoise_clamps_to_unit_range(self, rng, zero_network):
        params = zero_network.copy()
        params.head.bias[:] = -0.75
        y = Tensor(rng.uniform(size=(1, 1, 8, 8)))
        out = denoise(y, params).data
        assert out.max() <= 1.0 and out.min() >= 0.0
        assert np.any(out == 1.0)

    def test_multichannel_input_rejected(self, rng, one_block_params):
        with pytest.raises(ChannelMismatchError) as excinfo:
            network_forward(Tensor(rng.uniform(size=(1, 3, 8, 8))), one_block_params)
        assert excinfo.value.expected_channels == 1
        assert excinfo.value.actual_channels == 3

    @pytest.mark.parametrize("flags", [(False, False), (True, False), (False, True)])
    def test_matches_training_path(self, rng, flags):
        config = NetworkConfig(num_blocks=2, branch_output_relu=flags[0], post_add_relu=flags[1])
        params = init_params(config, rng_seed=3)
        y = Tensor(rng.uniform(size=(2, 1, 14, 11)))
        cached, _ = network_forward_cached(y, params)
        assert_array_equal(network_forward(y, params).data, cached.data)

    def test_peak_memory_flat_in_block_count(self, rng):
        y = Tensor(rng.uniform(size=(1, 1, 48, 64)))
        peaks = {}
        for blocks in (1, 8):
            params = init_params(NetworkConfig(num_blocks=blocks), rng_seed=0)
            tracemalloc.start()
            try:
                denoise(y, params)
                peaks[blocks] = tracemalloc.get_traced_memory()[1]
            finally:
                tracemalloc.stop()
        assert peaks[8] < 1.5 * peaks[1]


class TestInitialisation:
    def test_same_seed_same_weights(self, one_block_config):
        a = init_params(one_block_config, rng_seed=11)
        b = init_params(one_block_config, rng_seed=11)
        for (name, layer_a), (_, layer_b) in zip(a.named_layers(), b.named_layers()):
            assert_array_equal(layer_a.weights, layer_b.weights, err_msg=name)

    def test_different_seed_different_weights(self, one_block_config):
        a = init_params(one_block_config, rng_seed=1)
        b = init_params(one_block_config, rng_seed=2)
        assert not np.array_equal(a.stem2.weights, b.stem2.weights)

    def test_he_variance_and_zero_bias(self):
        params = init_params(NetworkConfig(num_blocks=2), rng_seed=5)
        for name, layer in params.named_layers():
            fan_in = layer.c_in * layer.kernel_size ** 2
            if layer.weights.size >= 1000:
                assert layer.weights.var() == pytest.approx(2.0 / fan_in, rel=0.2), name
            assert not layer.bias.any(), name


class TestNetworkBackward:
    def test_gradient_reaches_first_stem(self, rng, one_block_params):
        y = Tensor(rng.uniform(size=(1, 1, 10, 10)))
        out, cache = network_forward_cached(y, one_block_params)
        grad_input, grads = network_backward(cache, Tensor(np.ones(out.shape)))
        assert grad_input.shape == y.shape
        assert np.linalg.norm(grads["stem1"].weights) > 0.0
        assert set(grads) == {name for name, *_ in layer_layout(one_block_params.config)}

    @pytest.mark.parametrize("seed", range(5))
    def test_finite_differences(self, seed):
        result = check_network(seed, samples=20)
        assert result.passed, result.describe()
