"""
Evaluation Protocols Module

This module runs trained models over image sets:
- evaluate_model: per-layer PSNR averaged over images and channel realizations
- snr_mismatch_sweep: one model across a grid of test forward/feedback SNRs
- variable_length_transmit / variable_length_sweep: stop after the first layer
  whose transmitter estimate meets a PSNR target
- gap_distribution: per-image PSNR differences between two record sets

Noise for image i and realization r always comes from the streams keyed by
(channel.seed, i, r, layer, link), so every protocol is reproducible and two
protocols evaluated at the same channel agree exactly.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from JSCCF.channel.channel import ChannelConfig, ChannelStreams
from JSCCF.errors import UnsupportedModeError, UsageError
from JSCCF.evaluation.config.config import (
    DEFAULT_EVAL_BATCH,
    DEFAULT_GAP_BINS,
    DEFAULT_REALIZATIONS,
)
from JSCCF.evaluation.metrics import empirical_cdf, finite_mean, psnr_per_image
from JSCCF.model.model import JsccModel, transmit_trace

logger = logging.getLogger("JSCCF.evaluation.protocols")


@dataclass
class EvalRecord:
    """One image under one channel realization; lists are indexed by layer - 1."""
    image_id: int
    realization: int
    psnr_db: List[float]
    channel_uses: List[int]
    fading_gain: complex = 1.0 + 0.0j


@dataclass
class EvalResult:
    mean_psnr_db: List[float]
    records: List[EvalRecord]

    def to_frame(self) -> pd.DataFrame:
        return records_frame(self.records)


@dataclass
class SweepSpec:
    """Test grid; an snr_fb_db of +inf means noiseless feedback."""
    snr_test_db: Sequence[float]
    snr_fb_db: Sequence[float] = field(default_factory=list)
    realizations: int = DEFAULT_REALIZATIONS
    dataset: Optional[str] = None

    def __post_init__(self):
        if self.realizations < 1:
            raise ValueError(f"realizations must be at least 1, got {self.realizations}")
        if not len(self.snr_test_db):
            raise ValueError("the sweep needs at least one test SNR")


def records_frame(records: Sequence[EvalRecord]) -> pd.DataFrame:
    """eval.csv layout: image_id, realization, layer, psnr_db, channel_uses."""
    rows = [
        (r.image_id, r.realization, j, psnr, uses)
        for r in records
        for j, (psnr, uses) in enumerate(zip(r.psnr_db, r.channel_uses), start=1)
    ]
    return pd.DataFrame(rows, columns=["image_id", "realization", "layer", "psnr_db", "channel_uses"])


def _batches(count: int, batch_size: int):
    for start in range(0, count, batch_size):
        yield np.arange(start, min(start + batch_size, count))


def evaluate_model(
    model: JsccModel,
    images: np.ndarray,
    channel: ChannelConfig,
    realizations: int = DEFAULT_REALIZATIONS,
    image_ids: Optional[Sequence[int]] = None,
    batch_size: int = DEFAULT_EVAL_BATCH,
    feedback_ablation: bool = False,
) -> EvalResult:
    """
    Mean PSNR of x_hat_j for every layer over images x realizations.

    Args:
        model: Trained model
        images: N x H x W x C in [0, 1]
        channel: Test channel
        realizations: Channel realizations per image
        image_ids: Stream keys of the images (default 0..N-1)
        batch_size: Images per trace
        feedback_ablation: Zero the estimate at every encoder input

    Returns:
        EvalResult with one record per (image, realization)
    """
    if realizations < 1:
        raise ValueError(f"realizations must be at least 1, got {realizations}")
    ids = np.arange(len(images)) if image_ids is None else np.asarray(image_ids)
    logger.info(
        f"Evaluating {len(images)} images x {realizations} realizations at "
        f"{channel.forward_snr_db} dB ({channel.forward_kind}), feedback {channel.effective_feedback_snr_db} dB"
    )
    records: List[EvalRecord] = []
    for r in range(realizations):
        for idx in _batches(len(images), batch_size):
            streams = ChannelStreams(channel.seed, tuple(int(i) for i in ids[idx]), r)
            x = images[idx].astype(model.dtype)
            trace = transmit_trace(model, x, channel, streams, feedback_ablation=feedback_ablation)
            per_layer = np.stack([psnr_per_image(x, rec.x_hat.data) for rec in trace.records], axis=1)
            for row, i in enumerate(idx):
                records.append(EvalRecord(
                    image_id=int(ids[i]),
                    realization=r,
                    psnr_db=[float(v) for v in per_layer[row]],
                    channel_uses=[rec.channel_uses for rec in trace.records],
                    fading_gain=complex(trace.draw.h[row]),
                ))
    records.sort(key=lambda rec: (rec.image_id, rec.realization))
    means = [finite_mean([rec.psnr_db[j] for rec in records]) for j in range(model.layers)]
    logger.info(f"Mean PSNR per layer: {', '.join(f'{m:.2f}' for m in means)} dB")
    return EvalResult(means, records)


def snr_mismatch_sweep(
    model: JsccModel,
    images: np.ndarray,
    channel: ChannelConfig,
    sweep: SweepSpec,
    feedback_ablation: bool = False,
) -> pd.DataFrame:
    """
    Evaluate one model over the test grid.

    Returns:
        sweep.csv rows: snr_test_db, snr_fb_db, layer, mean_psnr_db
    """
    if channel.forward_snr_db not in list(sweep.snr_test_db):
        logger.warning(f"Test grid does not contain the training SNR {channel.forward_snr_db} dB")
    feedback_grid = list(sweep.snr_fb_db) or [channel.effective_feedback_snr_db]
    rows = []
    for snr_test in sweep.snr_test_db:
        for snr_fb in feedback_grid:
            test_channel = channel.at(forward_snr_db=snr_test, feedback_snr_db=snr_fb)
            result = evaluate_model(model, images, test_channel, sweep.realizations, feedback_ablation=feedback_ablation)
            for j, mean in enumerate(result.mean_psnr_db, start=1):
                rows.append((float(snr_test), float(test_channel.effective_feedback_snr_db), j, mean))
    return pd.DataFrame(rows, columns=["snr_test_db", "snr_fb_db", "layer", "mean_psnr_db"])


@dataclass
class VarlenOutcome:
    image_id: int
    target_db: float
    layers_used: int
    channel_uses: int
    achieved_psnr_db: float
    met: bool
    receiver_layers: int

    @property
    def agree(self) -> bool:
        return self.layers_used == self.receiver_layers


def _first_meeting(psnrs: np.ndarray, target: float) -> Optional[int]:
    hits = np.nonzero(psnrs >= target)[0]
    return int(hits[0]) if len(hits) else None


def variable_length_transmit(
    model: JsccModel,
    x: np.ndarray,
    target_psnr: Union[float, Sequence[float]],
    channel: ChannelConfig,
    streams: Optional[ChannelStreams] = None,
) -> List[VarlenOutcome]:
    """
    Stop each image after the first layer whose transmitter estimate reaches
    ``target_psnr``; fall back to all L layers with met=False.

    The receiver-side stopping layer (first x_hat_j meeting the target) is
    reported alongside; with noiseless feedback both always agree.

    Raises:
        UnsupportedModeError: If the feedback link is noisy
    """
    if not channel.feedback_noiseless:
        raise UnsupportedModeError("variable-length transmission requires noiseless feedback")
    targets = [target_psnr] if np.isscalar(target_psnr) else list(target_psnr)
    x = np.asarray(x, dtype=model.dtype)
    ids = streams.image_indices if streams is not None else tuple(range(len(x)))
    trace = transmit_trace(model, x, channel, streams, full_feedback=True)
    tx = np.stack([psnr_per_image(x, rec.x_tilde.data) for rec in trace.records], axis=1)
    rx = np.stack([psnr_per_image(x, rec.x_hat.data) for rec in trace.records], axis=1)
    uses = [rec.channel_uses for rec in trace.records]

    outcomes = []
    for target in targets:
        for row, image_id in enumerate(ids):
            stop = _first_meeting(tx[row], target)
            met = stop is not None
            layer = stop if met else model.layers - 1
            heard = _first_meeting(rx[row], target)
            outcomes.append(VarlenOutcome(
                image_id=int(image_id),
                target_db=float(target),
                layers_used=layer + 1,
                channel_uses=uses[layer],
                achieved_psnr_db=float(rx[row, layer]),
                met=met,
                receiver_layers=(heard if heard is not None else model.layers - 1) + 1,
            ))
    return outcomes


def variable_length_sweep(
    model: JsccModel,
    images: np.ndarray,
    channel: ChannelConfig,
    targets: Sequence[float],
    realization: int = 0,
    batch_size: int = DEFAULT_EVAL_BATCH,
) -> pd.DataFrame:
    """
    varlen.csv rows: image_id, target_db, layers_used, channel_uses, met, then
    bandwidth_ratio (channel uses / n), achieved_psnr_db and receiver_layers.
    """
    n = int(np.prod(images.shape[1:]))
    outcomes: List[VarlenOutcome] = []
    logger.info(f"Variable-length transmission of {len(images)} images at targets {list(targets)} dB")
    for idx in _batches(len(images), batch_size):
        streams = ChannelStreams(channel.seed, tuple(int(i) for i in idx), realization)
        outcomes.extend(variable_length_transmit(model, images[idx], targets, channel, streams))
    frame = pd.DataFrame([
        (o.image_id, o.target_db, o.layers_used, o.channel_uses, o.met, o.channel_uses / n,
         o.achieved_psnr_db, o.receiver_layers)
        for o in outcomes
    ], columns=[
        "image_id", "target_db", "layers_used", "channel_uses", "met", "bandwidth_ratio",
        "achieved_psnr_db", "receiver_layers",
    ])
    return frame.sort_values(["target_db", "image_id"], kind="stable").reset_index(drop=True)


def average_bandwidth_ratio(varlen: pd.DataFrame) -> pd.DataFrame:
    """Per target: mean bandwidth ratio, mean layers used and fraction of images that met it."""
    grouped = varlen.groupby("target_db", sort=True)
    return pd.DataFrame({
        "mean_bandwidth_ratio": grouped["bandwidth_ratio"].mean(),
        "mean_layers_used": grouped["layers_used"].mean(),
        "fraction_met": grouped["met"].mean(),
    }).reset_index()


@dataclass
class GapDistribution:
    differences: pd.Series
    counts: np.ndarray
    edges: np.ndarray
    cdf_values: np.ndarray
    cdf_probabilities: np.ndarray
    fraction_positive: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "image_id": self.differences.index,
            "psnr_gap_db": self.differences.to_numpy(),
        })


def _per_image_psnr(records: Union[Sequence[EvalRecord], pd.DataFrame], layer: Optional[int]) -> pd.Series:
    if isinstance(records, pd.DataFrame):
        frame = records
    else:
        frame = records_frame(records)
    if layer is None and "layer" in frame.columns:
        layer = int(frame["layer"].max())
    if layer is not None and "layer" in frame.columns:
        frame = frame[frame["layer"] == layer]
    return frame.groupby("image_id", sort=True)["psnr_db"].mean()


def gap_distribution(
    records_a: Union[Sequence[EvalRecord], pd.DataFrame],
    records_b: Union[Sequence[EvalRecord], pd.DataFrame],
    layer: Optional[int] = None,
    bins: int = DEFAULT_GAP_BINS,
) -> GapDistribution:
    """
    Per-image PSNR difference A - B, each side averaged over realizations
    first. Positive values are images where A is better.

    Args:
        records_a, records_b: EvalRecords or frames with image_id and psnr_db
            (and optionally layer) columns
        layer: Layer to compare; defaults to each side's last layer
        bins: Histogram bins

    Raises:
        UsageError: If the two sides cover different image ids
    """
    a = _per_image_psnr(records_a, layer)
    b = _per_image_psnr(records_b, layer)
    if not a.index.equals(b.index):
        missing = sorted(set(a.index) ^ set(b.index))
        raise UsageError(f"record sets cover different images (mismatched ids: {missing[:10]})")
    differences = a - b
    finite = differences[np.isfinite(differences.to_numpy())]
    counts, edges = np.histogram(finite.to_numpy(), bins=bins)
    cdf_values, cdf_probabilities = empirical_cdf(finite.to_numpy())
    fraction_positive = float(np.mean(differences.to_numpy() > 0)) if len(differences) else math.nan
    return GapDistribution(differences, counts, edges, cdf_values, cdf_probabilities, fraction_positive)
