"""Tests for the residual loss and the training loop."""

from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_array_equal

from dnirb.core import Tensor
from dnirb.data.training_pairs import TrainingPairs, make_training_pairs
from dnirb.errors import ConfigurationError, NumericAbortError, ShapeMismatchError
from dnirb.network import NetworkConfig, init_params
from dnirb.noise_lab import GaussianNoise
from dnirb.trainer import TrainConfig, TrainReport, residual_loss, train


def flat_pairs(count=6, size=8, seed=0):
    return make_training_pairs([np.full((size, size), 0.5)] * count, GaussianNoise(25.0), seed=seed)


def assert_same_params(a, b):
    for (name, layer_a), (_, layer_b) in zip(a.named_layers(), b.named_layers()):
        assert_array_equal(layer_a.weights, layer_b.weights, err_msg=name)
        assert_array_equal(layer_a.bias, layer_b.bias, err_msg=name)


class TestResidualLoss:
    def test_per_sample_mean(self):
        pred = Tensor(np.array([[[[1.0, 1.0, 1.0]]], [[[1.0, 2.0, 0.0]]]]))
        loss, _ = residual_loss(pred, Tensor.zeros(pred.shape))
        assert loss == 4.0

    def test_per_pixel_mean(self):
        pred = Tensor(np.full((2, 1, 2, 2), 3.0))
        loss, _ = residual_loss(pred, Tensor.zeros(pred.shape), reduction="pixel")
        assert loss == 9.0

    def test_perfect_prediction(self, rng):
        target = Tensor(rng.standard_normal((3, 1, 4, 4)))
        loss, grad = residual_loss(target, target)
        assert loss == 0.0
        assert not grad.data.any()

    def test_gradient(self):
        pred = Tensor(np.full((2, 1, 1, 1), 1.0))
        _, grad = residual_loss(pred, Tensor.zeros(pred.shape))
        assert_array_equal(grad.data, np.full((2, 1, 1, 1), 1.0))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            residual_loss(Tensor.zeros((1, 1, 2, 2)), Tensor.zeros((1, 1, 2, 3)))


class TestTrainReport:
    def test_smoothed_losses_drop_partial_window(self):
        report = TrainReport(steps=[1, 2, 3, 4, 5], losses=[4.0, 2.0, 3.0, 1.0, 0.0])
        assert report.smoothed_losses(window=2) == [3.0, 2.0]


class TestTrainConfig:
    @pytest.mark.parametrize("field, value", [("batch_size", 0), ("steps", -1), ("lr", -1e-3), ("lr", float("nan")), ("threads", 0)])
    def test_invalid(self, field, value):
        with pytest.raises(ConfigurationError):
            TrainConfig(**{field: value})

    def test_zero_lr_allowed(self):
        assert TrainConfig(lr=0.0).lr == 0.0


class TestTrain:
    def test_zero_lr_leaves_params(self, one_block_params):
        trained, report = train(one_block_params, flat_pairs(), TrainConfig(batch_size=2, steps=3, lr=0.0))
        assert_same_params(trained, one_block_params)
        assert all(total == 0.0 for total in report.cumulative_updates.values())
        assert len(report.losses) == 3

    def test_input_params_untouched(self, one_block_params):
        before = one_block_params.copy()
        train(one_block_params, flat_pairs(), TrainConfig(batch_size=2, steps=2))
        assert_same_params(one_block_params, before)

    def test_same_seed_same_run(self, one_block_params):
        config = TrainConfig(batch_size=3, steps=4, seed=5)
        a, report_a = train(one_block_params, flat_pairs(), config)
        b, report_b = train(one_block_params, flat_pairs(), config)
        assert report_a.losses == report_b.losses
        assert_same_params(a, b)

    def test_threaded_run_is_repeatable(self, one_block_params):
        config = TrainConfig(batch_size=4, steps=2, seed=1, threads=2)
        a, _ = train(one_block_params, flat_pairs(), config)
        b, _ = train(one_block_params, flat_pairs(), config)
        assert_same_params(a, b)

    def test_loss_decreases(self, one_block_params):
        _, report = train(one_block_params, flat_pairs(count=8), TrainConfig(batch_size=4, steps=100, seed=0))
        assert np.mean(report.losses[-10:]) < report.initial_loss
        assert all(total > 0.0 for total in report.cumulative_updates.values())

    def test_nan_aborts_with_step(self, one_block_params):
        pairs = flat_pairs()
        poisoned = TrainingPairs(pairs.noisy, np.full_like(pairs.noise, np.nan))
        with pytest.raises(NumericAbortError) as excinfo:
            train(one_block_params, poisoned, TrainConfig(batch_size=2, steps=5))
        assert excinfo.value.step == 1
        assert excinfo.value.exit_code == 4

    def test_abort_lists_step_checkpoints(self, tmp_path, one_block_params):
        config = TrainConfig(batch_size=2, steps=6, optimizer="sgd", lr=1e300, checkpoint_interval=1, log_interval=0)
        with pytest.raises(NumericAbortError) as excinfo:
            train(one_block_params, flat_pairs(), config, checkpoint_dir=tmp_path)
        written = excinfo.value.checkpoints
        assert excinfo.value.step >= 2
        assert len(written) == excinfo.value.step - 1
        assert all(Path(p).exists() for p in written)

    def test_report_and_checkpoints(self, tmp_path, one_block_params):
        pairs = flat_pairs()
        config = TrainConfig(batch_size=2, steps=4, checkpoint_interval=2, validation_interval=2)
        _, report = train(one_block_params, pairs, config, validation=flat_pairs(count=2, seed=9), checkpoint_dir=tmp_path)
        assert [p.split("/")[-1] for p in report.checkpoints] == ["step_000002.ckpt", "step_000004.ckpt"]
        assert set(report.val_psnr) == {2, 4}

        report.to_csv(tmp_path / "report.csv")
        frame = pd.read_csv(tmp_path / "report.csv")
        assert list(frame.columns) == ["step", "loss", "val_psnr", "ms_per_step"]
        assert frame["step"].tolist() == [1, 2, 3, 4]
        assert frame["val_psnr"].isna().tolist() == [True, False, True, False]

    @pytest.mark.slow
    def test_overfits_tiny_set(self):
        params = init_params(NetworkConfig(num_blocks=1), rng_seed=0)
        pairs = flat_pairs(count=10, size=16)
        _, report = train(params, pairs, TrainConfig(batch_size=10, steps=2000, seed=0))
        assert report.final_loss < 0.01 * report.initial_loss
        smoothed = report.smoothed_losses(window=200)
        assert len(smoothed) == 10
        assert all(later <= earlier for earlier, later in zip(smoothed, smoothed[1:]))
