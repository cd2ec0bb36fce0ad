"""Tests for checkpoint save / load and corruption detection."""

import struct

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from dnirb.checkpoint import (
    FORMAT_VERSION,
    MAGIC,
    checkpoint_checksum,
    encode_checkpoint,
    load_checkpoint,
    read_checkpoint_info,
    save_checkpoint,
)
from dnirb.core import Tensor
from dnirb.errors import (
    CheckpointChecksumError,
    CheckpointError,
    CheckpointTruncatedError,
    CheckpointVersionError,
    HyperparameterMismatchError,
)
from dnirb.network import NetworkConfig, init_params, network_forward


@pytest.fixture
def two_block_params():
    return init_params(NetworkConfig(num_blocks=2), rng_seed=3)


@pytest.fixture
def saved(tmp_path, two_block_params):
    path = tmp_path / "net.ckpt"
    save_checkpoint(two_block_params, path)
    return path


def rewrite(path, mutate):
    blob = bytearray(path.read_bytes())
    mutate(blob)
    path.write_bytes(bytes(blob))


class TestRoundTrip:
    def test_parameters_bit_exact(self, saved, two_block_params):
        loaded = load_checkpoint(saved)
        assert loaded.config == two_block_params.config
        for (name, original), (_, restored) in zip(two_block_params.named_layers(), loaded.named_layers()):
            assert_array_equal(restored.weights, original.weights, err_msg=name)
            assert_array_equal(restored.bias, original.bias, err_msg=name)

    def test_forward_output_identical(self, rng, saved, two_block_params):
        y = Tensor(rng.uniform(size=(1, 1, 12, 12)))
        assert_array_equal(network_forward(y, load_checkpoint(saved)).data, network_forward(y, two_block_params).data)

    def test_activation_flags_survive(self, tmp_path):
        config = NetworkConfig(num_blocks=1, branch_output_relu=True, post_add_relu=True)
        path = tmp_path / "flags.ckpt"
        save_checkpoint(init_params(config, rng_seed=0), path)
        assert load_checkpoint(path).config == config

    def test_encoding_is_deterministic(self, two_block_params):
        assert encode_checkpoint(two_block_params) == encode_checkpoint(two_block_params.copy())

    def test_checksum_returned_and_stored(self, tmp_path, two_block_params):
        path = tmp_path / "again.ckpt"
        checksum = save_checkpoint(two_block_params, path)
        assert checkpoint_checksum(path) == checksum
        assert not path.with_name(path.name + ".tmp").exists()

    def test_header_layout(self, saved):
        blob = saved.read_bytes()
        assert blob[:8] == MAGIC
        assert struct.unpack("<I", blob[8:12])[0] == FORMAT_VERSION
        assert struct.unpack("<I", blob[12:16])[0] == 2

    def test_info_lists_tensors_in_forward_order(self, saved):
        names = [entry.name for entry in read_checkpoint_info(saved).manifest]
        assert names[:4] == ["stem1.weights", "stem1.bias", "stem2.weights", "stem2.bias"]
        assert names[-2:] == ["head.weights", "head.bias"]


class TestCorruption:
    def test_flipped_payload_byte(self, saved):
        def flip(blob):
            blob[-12] ^= 0xFF

        rewrite(saved, flip)
        with pytest.raises(CheckpointChecksumError):
            load_checkpoint(saved)

    def test_truncated_file(self, saved):
        saved.write_bytes(saved.read_bytes()[:-100])
        with pytest.raises(CheckpointTruncatedError):
            load_checkpoint(saved)

    def test_truncated_header(self, saved):
        saved.write_bytes(saved.read_bytes()[:20])
        with pytest.raises(CheckpointTruncatedError):
            load_checkpoint(saved)

    def test_unknown_version(self, saved):
        def bump(blob):
            blob[8:12] = struct.pack("<I", FORMAT_VERSION + 1)

        rewrite(saved, bump)
        with pytest.raises(CheckpointVersionError):
            load_checkpoint(saved)

    def test_wrong_magic(self, saved):
        def stamp(blob):
            blob[:8] = b"NOTACKPT"

        rewrite(saved, stamp)
        with pytest.raises(CheckpointError):
            load_checkpoint(saved)

    def test_all_failures_share_exit_code(self):
        for error in (CheckpointChecksumError, CheckpointTruncatedError, CheckpointVersionError):
            assert error.exit_code == 5


class TestExpectedTopology:
    def test_block_count_mismatch(self, tmp_path):
        path = tmp_path / "n4.ckpt"
        save_checkpoint(init_params(NetworkConfig(num_blocks=4), rng_seed=0), path)
        with pytest.raises(HyperparameterMismatchError) as excinfo:
            load_checkpoint(path, expected=NetworkConfig(num_blocks=2))
        assert excinfo.value.field == "num_blocks"
        assert (excinfo.value.stored, excinfo.value.requested) == (4, 2)
        assert excinfo.value.exit_code == 5

    def test_matching_topology_loads(self, saved):
        params = load_checkpoint(saved, expected=NetworkConfig(num_blocks=2))
        assert params.config.num_blocks == 2
        assert np.isfinite(params.stem1.weights).all()
