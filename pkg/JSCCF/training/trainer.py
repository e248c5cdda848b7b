"""
Layer-wise Training Module

This module trains the layered model one layer at a time:
- TrainConfig / TrainReport: settings and loss history of one layer
- iterate_batches / split_validation: seeded batching and held-out split
- early_stop: validation-based stopping rule
- train_layer: optimize layer j with layers 1..j-1 frozen
- train_model: train_layer for j = 1..L in order

Every batch draws fresh channel noise for all layers from the stream keyed by
(seed, step, TRAIN_STREAM). Validation reuses one fixed stream per validation
image so losses are comparable across evaluations.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from JSCCF.autodiff import functional as F
from JSCCF.autodiff.config.config import DEFAULT_LEARNING_RATE
from JSCCF.autodiff.optim import AdamState, adam_step
from JSCCF.autodiff.tensor import Tape, Tensor
from JSCCF.channel.channel import ChannelConfig, ChannelStreams
from JSCCF.errors import ConfigurationError, NumericalError, UsageError
from JSCCF.model.checkpoint import save_checkpoint
from JSCCF.model.model import JsccModel, transmit_trace
from JSCCF.training.config.config import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_EVAL_EVERY,
    DEFAULT_LOSS_REDUCTION,
    DEFAULT_MAX_STEPS,
    DEFAULT_PATIENCE,
    DEFAULT_TOL_IMPROVE,
    DEFAULT_VALIDATION_FRACTION,
    LOG_EVERY,
    TRAIN_STREAM,
    VALIDATION_STREAM,
)

logger = logging.getLogger("JSCCF.training.trainer")


@dataclass
class TrainConfig:
    layer: int
    batch_size: int = DEFAULT_BATCH_SIZE
    learning_rate: float = DEFAULT_LEARNING_RATE
    max_steps: int = DEFAULT_MAX_STEPS
    patience: int = DEFAULT_PATIENCE
    tol_improve: float = DEFAULT_TOL_IMPROVE
    eval_every: int = DEFAULT_EVAL_EVERY
    validation_fraction: float = DEFAULT_VALIDATION_FRACTION
    seed: int = 0
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    feedback_ablation: bool = False
    loss_reduction: str = DEFAULT_LOSS_REDUCTION
    checkpoint_path: Optional[Path] = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigurationError(f"batch size must be at least 1, got {self.batch_size}")
        if self.patience < 1:
            raise ConfigurationError(f"patience must be at least 1, got {self.patience}")
        if self.max_steps < 1 or self.eval_every < 1:
            raise ConfigurationError("max_steps and eval_every must be at least 1")
        if not self.learning_rate > 0:
            raise ConfigurationError(f"learning rate must be positive, got {self.learning_rate}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ConfigurationError(f"validation fraction must be in [0, 1), got {self.validation_fraction}")
        if self.loss_reduction not in ("mean", "per_image"):
            raise ConfigurationError(f"unknown loss reduction '{self.loss_reduction}'")


@dataclass
class TrainReport:
    """Loss history of one layer; ``val_losses`` holds (step, loss) pairs."""
    layer: int
    train_losses: List[float] = field(default_factory=list)
    val_losses: List[Tuple[int, float]] = field(default_factory=list)
    stop_step: int = 0
    best_step: int = 0
    best_val_loss: float = float("inf")
    checkpoint_path: Optional[Path] = None

    def to_frame(self) -> pd.DataFrame:
        """One row per step: step, train_loss, val_loss (empty between evaluations)."""
        train = pd.DataFrame({
            "step": np.arange(len(self.train_losses), dtype=np.int64),
            "train_loss": self.train_losses,
        })
        val = pd.DataFrame(self.val_losses, columns=["step", "val_loss"]).astype({"step": np.int64})
        frame = train.merge(val, on="step", how="outer").sort_values("step", kind="stable")
        return frame.reset_index(drop=True)[["step", "train_loss", "val_loss"]]

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path, index=False, float_format="%.10g")
        return path


@dataclass
class StopDecision:
    stop: bool
    best_index: int


def early_stop(history: Sequence[float], patience: int, tol_improve: float = DEFAULT_TOL_IMPROVE) -> StopDecision:
    """
    Stop once ``patience`` consecutive evaluations fail to beat the best loss
    by more than ``tol_improve``.

    Raises:
        ValueError: If ``history`` is empty
    """
    if not history:
        raise ValueError("early_stop needs at least one validation loss")
    best_index, best = 0, history[0]
    for i, loss in enumerate(history[1:], start=1):
        if loss < best - tol_improve:
            best_index, best = i, loss
    return StopDecision(stop=len(history) - 1 - best_index >= patience, best_index=best_index)


def iterate_batches(count: int, batch_size: int, rng: np.random.Generator) -> Iterator[np.ndarray]:
    """Endless index batches; a fresh permutation each epoch, last partial batch kept."""
    if batch_size < 1:
        raise ValueError("batch_size must be at least 1")
    epoch = 0
    while True:
        order = rng.permutation(count)
        total_batches = (count + batch_size - 1) // batch_size
        for i in range(0, count, batch_size):
            logger.debug(f"Epoch {epoch}, batch {i // batch_size + 1}/{total_batches}")
            yield order[i:i + batch_size]
        epoch += 1


def split_validation(
    images: np.ndarray, fraction: float, seed: int
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Hold out round(fraction * N) images (disjoint from the rest)."""
    held = int(round(fraction * len(images)))
    if held == 0 or held >= len(images):
        return images, None
    order = np.random.default_rng([seed, VALIDATION_STREAM]).permutation(len(images))
    return images[np.sort(order[held:])], images[np.sort(order[:held])]


def _layer_loss(
    model: JsccModel,
    j: int,
    x: Tensor,
    channel: ChannelConfig,
    streams: ChannelStreams,
    feedback_ablation: bool,
    reduction: str,
) -> Tensor:
    trace = transmit_trace(model, x, channel, streams, upto=j, feedback_ablation=feedback_ablation)
    return F.mse_loss(x, trace.records[-1].x_hat, reduction=reduction)


def validation_loss(
    model: JsccModel,
    j: int,
    images: np.ndarray,
    cfg: TrainConfig,
) -> float:
    """Mean layer-j loss over ``images`` with one fixed stream per image."""
    total = 0.0
    for start in range(0, len(images), cfg.batch_size):
        batch = images[start:start + cfg.batch_size]
        streams = ChannelStreams(cfg.seed, tuple(range(start, start + len(batch))), VALIDATION_STREAM)
        x = Tensor(batch.astype(model.dtype))
        loss = _layer_loss(model, j, x, cfg.channel, streams, cfg.feedback_ablation, cfg.loss_reduction)
        total += float(loss.data) * len(batch)
    return total / len(images)


def _snapshot(params: Dict[str, Tensor]) -> Dict[str, np.ndarray]:
    return {name: p.data.copy() for name, p in params.items()}


def train_layer(
    model: JsccModel,
    j: int,
    images: np.ndarray,
    cfg: TrainConfig,
    val_images: Optional[np.ndarray] = None,
) -> TrainReport:
    """
    Optimize layer j's encoder, decoder and combiner with earlier layers frozen.

    Args:
        model: Model whose layers 1..j-1 are trained
        j: Layer to train
        images: Training images N x H x W x C in [0, 1]
        cfg: Training configuration
        val_images: Held-out images; split from ``images`` when omitted

    Returns:
        TrainReport; the model keeps the best-validation parameters and
        layer j is marked trained and frozen

    Raises:
        UsageError: If j is out of range or an earlier layer is untrained
        NumericalError: If a training loss is not finite
    """
    model.check_layer(j)
    untrained = [i for i in range(1, j) if not model.trained[i - 1]]
    if untrained:
        raise UsageError(f"layer {j} needs trained earlier layers; untrained: {untrained}")
    if len(images) == 0:
        raise ValueError("no training images")

    if val_images is None:
        images, val_images = split_validation(images, cfg.validation_fraction, cfg.seed)

    model.set_trainable(j)
    params = model.layer_parameters(j)
    state = AdamState(lr=cfg.learning_rate)
    batches = iterate_batches(len(images), cfg.batch_size, np.random.default_rng([cfg.seed, j]))
    report = TrainReport(layer=j)
    history: List[float] = []
    best_params = _snapshot(params)

    logger.info(
        f"Training layer {j}: {len(images)} images, "
        f"{0 if val_images is None else len(val_images)} held out, up to {cfg.max_steps} steps"
    )

    def evaluate(step: int) -> bool:
        nonlocal best_params
        loss = validation_loss(model, j, val_images, cfg)
        report.val_losses.append((step, loss))
        history.append(loss)
        decision = early_stop(history, cfg.patience, cfg.tol_improve)
        if decision.best_index == len(history) - 1:
            best_params = _snapshot(params)
        logger.info(f"Layer {j} step {step}: validation loss {loss:.6g}")
        return decision.stop

    step = 0
    stopped = False
    while step < cfg.max_steps:
        if val_images is not None and step % cfg.eval_every == 0 and evaluate(step):
            stopped = True
            break
        x = Tensor(images[next(batches)].astype(model.dtype))
        streams = ChannelStreams(cfg.seed, (step,), TRAIN_STREAM, per_image=False)
        for p in params.values():
            p.zero_grad()
        with Tape() as tape:
            loss = _layer_loss(model, j, x, cfg.channel, streams, cfg.feedback_ablation, cfg.loss_reduction)
            value = float(loss.data)
            if not np.isfinite(value):
                logger.error(f"Layer {j} step {step}: non-finite training loss")
                raise NumericalError(f"training loss became {value} at step {step} of layer {j}")
            tape.backward(loss)
        adam_step(state, params)
        report.train_losses.append(value)
        if step % LOG_EVERY == 0:
            logger.debug(f"Layer {j} step {step}: train loss {value:.6g}")
        step += 1

    if val_images is not None and not stopped:
        evaluate(step)

    report.stop_step = step
    if history:
        best = early_stop(history, cfg.patience, cfg.tol_improve).best_index
        report.best_step, report.best_val_loss = report.val_losses[best]
        for name, values in best_params.items():
            params[name].data[...] = values
    else:
        report.best_step = step

    model.trained[j - 1] = True
    model.set_trainable(None)
    if cfg.checkpoint_path is not None:
        report.checkpoint_path = save_checkpoint(model, cfg.checkpoint_path)
    logger.info(
        f"Layer {j} finished at step {step} (best step {report.best_step}, "
        f"validation loss {report.best_val_loss:.6g})"
    )
    return report


def train_model(
    model: JsccModel,
    images: np.ndarray,
    configs: Sequence[TrainConfig],
    val_images: Optional[np.ndarray] = None,
) -> List[TrainReport]:
    """Train layers 1..L in order with one TrainConfig per layer."""
    if len(configs) != model.layers:
        raise ConfigurationError(f"{len(configs)} training configs for {model.layers} layers")
    reports = []
    for j, cfg in enumerate(configs, start=1):
        if cfg.layer != j:
            raise ConfigurationError(f"config {j} targets layer {cfg.layer}")
        reports.append(train_layer(model, j, images, cfg, val_images))
    return reports
