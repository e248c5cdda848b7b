"""
Tests for layer-wise training (trainer.py)

This module contains tests for:
- Early stopping decisions
- Configuration validation and batching
- Frozen earlier layers and layer ordering
- Reproducibility and report tables
"""

import numpy as np
import pandas as pd
import pytest

from JSCCF.autodiff import functional as F
from JSCCF.autodiff.tensor import Tape, Tensor
from JSCCF.channel.channel import ChannelConfig, ChannelStreams
from JSCCF.errors import ConfigurationError, NumericalError, UsageError
from JSCCF.model.arch import ArchSpec
from JSCCF.model.checkpoint import load_checkpoint
from JSCCF.model.model import build_model, transmit_trace
from JSCCF.training.trainer import (
    TrainConfig,
    TrainReport,
    early_stop,
    iterate_batches,
    split_validation,
    train_layer,
    train_model,
    validation_loss,
)

SPEC = ArchSpec(
    channel_uses=(8, 8), height=8, width=8, channels=1, kernel_size=3,
    encoder_widths=(2, 2, 2), decoder_widths=(2, 2, 2), combiner_widths=(2, 2),
)


@pytest.fixture
def images():
    return np.random.default_rng(0).uniform(0.0, 1.0, size=(12, 8, 8, 1)).astype(np.float32)


def quick_config(layer, **overrides):
    settings = dict(
        layer=layer, batch_size=4, learning_rate=1e-3, max_steps=6, patience=3,
        eval_every=2, seed=0, channel=ChannelConfig(forward_snr_db=5.0),
    )
    settings.update(overrides)
    return TrainConfig(**settings)


# Test early_stop
def test_early_stop_after_patience():
    decision = early_stop([1.0, 0.9, 0.95, 0.96, 0.97], patience=3)
    assert decision.stop
    assert decision.best_index == 1


def test_early_stop_continues_while_improving():
    decision = early_stop([1.0, 0.9, 0.8], patience=2)
    assert not decision.stop
    assert decision.best_index == 2


def test_early_stop_tolerance():
    decision = early_stop([1.0, 0.99, 0.985], patience=2, tol_improve=0.05)
    assert decision.stop
    assert decision.best_index == 0


def test_early_stop_empty():
    with pytest.raises(ValueError):
        early_stop([], patience=1)


# Test TrainConfig
@pytest.mark.parametrize("overrides", [
    dict(batch_size=0), dict(patience=0), dict(learning_rate=0.0),
    dict(validation_fraction=1.0), dict(loss_reduction="sum"),
])
def test_invalid_config(overrides):
    with pytest.raises(ConfigurationError):
        quick_config(1, **overrides)


# Test batching
def test_batches_cover_each_epoch():
    batches = iterate_batches(10, 4, np.random.default_rng(0))
    epoch = [next(batches) for _ in range(3)]
    assert [len(b) for b in epoch] == [4, 4, 2]
    assert sorted(np.concatenate(epoch).tolist()) == list(range(10))


def test_split_validation_is_disjoint(images):
    marked = images.copy()
    marked[:, 0, 0, 0] = np.arange(len(images))
    train, val = split_validation(marked, 0.25, seed=1)
    assert len(val) == 3 and len(train) == 9
    assert not set(train[:, 0, 0, 0]) & set(val[:, 0, 0, 0])


def test_split_validation_zero_fraction(images):
    train, val = split_validation(images, 0.0, seed=0)
    assert val is None
    assert train is images


# Test train_layer / train_model
def test_later_layer_needs_trained_predecessor(images):
    model = build_model(SPEC, seed=0)
    with pytest.raises(UsageError, match="untrained"):
        train_layer(model, 2, images, quick_config(2))


def test_training_layer_two_leaves_layer_one_frozen(images):
    model = build_model(SPEC, seed=0)
    train_layer(model, 1, images, quick_config(1))
    before = {name: p.data.copy() for name, p in model.layer_parameters(1).items()}
    train_layer(model, 2, images, quick_config(2))
    for name, p in model.layer_parameters(1).items():
        np.testing.assert_array_equal(p.data, before[name])
    assert model.trained == [True, True]


def _layer_two_loss(model, x):
    streams = ChannelStreams(0, tuple(range(len(x.data))))
    trace = transmit_trace(model, x, ChannelConfig(forward_snr_db=5.0), streams, upto=2)
    return F.mse_loss(x, trace.records[-1].x_hat)


def test_layer_two_loss_does_not_flow_into_layer_one(images):
    model = build_model(SPEC, seed=0)
    train_layer(model, 1, images, quick_config(1, validation_fraction=0.0))
    model.set_trainable(2)
    frozen = max(model.layer_parameters(1).values(), key=lambda p: p.size)
    x = Tensor(images[:4])

    with Tape() as tape:
        loss = _layer_two_loss(model, x)
        tape.backward(loss)
    assert frozen.grad is None or not np.any(frozen.grad)
    assert any(np.any(p.grad) for p in model.layer_parameters(2).values())

    # the frozen weight still shapes the layer-2 loss
    original = frozen.data.copy()
    frozen.data = original + np.float32(0.05)
    shifted = _layer_two_loss(model, x)
    frozen.data = original
    assert abs(float(shifted.data) - float(loss.data)) > 1e-7


def test_layer_one_bytes_survive_layer_two_training(images):
    model = build_model(SPEC, seed=0)
    train_layer(model, 1, images, quick_config(1))
    before = {name: p.data.tobytes() for name, p in model.layer_parameters(1).items()}
    train_layer(model, 2, images, quick_config(2, max_steps=10))
    assert {name: p.data.tobytes() for name, p in model.layer_parameters(1).items()} == before


def test_non_finite_loss_raises(images):
    model = build_model(SPEC, seed=0)
    poisoned = np.full_like(images, np.nan)
    with np.errstate(invalid="ignore"), pytest.raises(NumericalError, match="step 0"):
        train_layer(model, 1, poisoned, quick_config(1, validation_fraction=0.0))


def test_training_changes_parameters(images):
    model = build_model(SPEC, seed=0)
    before = {name: p.data.copy() for name, p in model.layer_parameters(1).items()}
    train_layer(model, 1, images, quick_config(1, validation_fraction=0.0))
    changed = [name for name, p in model.layer_parameters(1).items() if not np.array_equal(p.data, before[name])]
    assert changed


def test_report_keeps_best_validation(images):
    model = build_model(SPEC, seed=0)
    cfg = quick_config(1)
    report = train_layer(model, 1, images, cfg)
    assert report.stop_step <= 6
    assert len(report.train_losses) == report.stop_step
    lowest = min(loss for _, loss in report.val_losses)
    assert lowest <= report.best_val_loss <= lowest + cfg.tol_improve
    _, val = split_validation(images, cfg.validation_fraction, cfg.seed)
    assert validation_loss(model, 1, val, cfg) == pytest.approx(report.best_val_loss, rel=1e-5)


def test_train_model_reports_and_checkpoint(images, tmp_path):
    model = build_model(SPEC, seed=0)
    path = tmp_path / "model.jscf"
    configs = [quick_config(1, checkpoint_path=path), quick_config(2, checkpoint_path=path)]
    reports = train_model(model, images, configs)
    assert [r.layer for r in reports] == [1, 2]
    assert load_checkpoint(path).trained == [True, True]


def test_train_model_config_count(images):
    with pytest.raises(ConfigurationError):
        train_model(build_model(SPEC, seed=0), images, [quick_config(1)])


def test_training_is_reproducible(images):
    def run():
        model = build_model(SPEC, seed=3)
        report = train_layer(model, 1, images, quick_config(1))
        return report.train_losses, {n: p.data.copy() for n, p in model.parameters().items()}

    (losses_a, params_a), (losses_b, params_b) = run(), run()
    assert losses_a == losses_b
    for name in params_a:
        np.testing.assert_array_equal(params_a[name], params_b[name])


# Test TrainReport
def test_report_frame_columns(tmp_path):
    report = TrainReport(layer=1, train_losses=[0.5, 0.4, 0.3], val_losses=[(0, 0.6), (2, 0.35)])
    frame = report.to_frame()
    assert list(frame.columns) == ["step", "train_loss", "val_loss"]
    assert frame["step"].tolist() == [0, 1, 2]
    assert pd.isna(frame.loc[1, "val_loss"])
    written = pd.read_csv(report.write_csv(tmp_path / "layer1.csv"))
    assert written["train_loss"].tolist() == [0.5, 0.4, 0.3]
