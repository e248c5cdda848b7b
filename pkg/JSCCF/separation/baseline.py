"""
Separation Baseline Module

Compress-then-channel-code reference points for the JSCC results:
- capacity_bits / capacity_bound_psnr: compression at the rate the channel
  capacity allows (infinite blocklength), the upper bound of any separation
  scheme
- fading_capacity_bound_psnr: the same with each image's instantaneous
  capacity under the slow Rayleigh gain the JSCC evaluation draws
- digital_scheme_psnr: a channel code of known frame error rate, falling back
  to the mean image on a frame error
- envelope: best configuration per SNR
- capacity_bound_records: the capacity bound per image and realization, for
  per-image gap distributions against the JSCC records
- varlen_separation_bandwidth: channel uses needed to reach a PSNR target
- separation_bandwidth_table: mean bandwidth ratio per SNR and PSNR target
- baseline_table: all of the above as baseline.csv rows

Every PSNR below a curve's lowest rate is the PSNR of the per-channel mean
image of that image (or the dataset mean for an aggregate curve).
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from JSCCF.channel.channel import ChannelConfig, ChannelStreams, draw_fading
from JSCCF.channel.config.config import LINK_FADING
from JSCCF.errors import ConfigurationError, ShapeError
from JSCCF.evaluation.config.config import PSNR_MAX
from JSCCF.evaluation.metrics import finite_mean, psnr
from JSCCF.separation.config.config import AGGREGATE_ID
from JSCCF.separation.tables import CurveKey, DigitalConfig, RdCurve

logger = logging.getLogger("JSCCF.separation.baseline")

Curves = Union[RdCurve, Sequence[RdCurve]]


def mean_image_reconstruction(image: np.ndarray) -> np.ndarray:
    """Every pixel replaced by the mean of its channel (H x W x C or N x H x W x C)."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim not in (3, 4):
        raise ShapeError(f"expected H x W x C or N x H x W x C, got shape {image.shape}")
    means = image.mean(axis=(-3, -2), keepdims=True)
    return np.broadcast_to(means, image.shape).copy()


def fallback_psnr(image: np.ndarray, max_value: float = PSNR_MAX) -> float:
    """PSNR of the mean-image reconstruction; ``image`` on the 0..max_value scale."""
    image = np.asarray(image, dtype=np.float64)
    return psnr(image, mean_image_reconstruction(image), max_value)


def attach_fallbacks(
    curves: Mapping[CurveKey, RdCurve],
    images: np.ndarray,
    image_ids: Optional[Sequence[int]] = None,
) -> Dict[CurveKey, RdCurve]:
    """
    Give every curve the fallback PSNR of its image.

    Args:
        curves: RD curves keyed by image id or "*"
        images: N x H x W x C in [0, 1]
        image_ids: Id of each image (default 0..N-1)

    Returns:
        New curves; the aggregate curve gets the dataset mean of the
        per-image fallback PSNRs
    """
    ids = list(range(len(images))) if image_ids is None else [int(i) for i in image_ids]
    per_image = {i: fallback_psnr(np.asarray(img, dtype=np.float64) * PSNR_MAX) for i, img in zip(ids, images)}
    attached = {}
    for key, curve in curves.items():
        if key == AGGREGATE_ID:
            attached[key] = curve.with_fallback(finite_mean(list(per_image.values()), "fallback PSNR"))
        elif key in per_image:
            attached[key] = curve.with_fallback(per_image[key])
        else:
            logger.warning(f"No image with id {key}; its curve keeps no fallback")
            attached[key] = curve
    return attached


def psnr_at_rate(curve: RdCurve, rate_bpp: float) -> Optional[float]:
    """
    PSNR of the largest curve rate not above ``rate_bpp``; None below the first point.

    Raises:
        ValueError: If the curve is empty
    """
    if curve.empty:
        raise ValueError(f"RD curve {curve.image_id} has no points")
    index = int(np.searchsorted(np.asarray(curve.rates), rate_bpp, side="right")) - 1
    return None if index < 0 else float(curve.psnrs[index])


def _fallback(curve: RdCurve) -> float:
    if curve.fallback_psnr_db is None:
        raise ConfigurationError(
            f"rate below the {curve.codec} curve of image {curve.image_id} and no mean-image fallback attached"
        )
    return curve.fallback_psnr_db


def _psnr_or_fallback(curve: RdCurve, rate_bpp: float) -> float:
    value = psnr_at_rate(curve, rate_bpp)
    return _fallback(curve) if value is None else value


def _over_curves(rd: Curves, fn) -> float:
    if isinstance(rd, RdCurve):
        return fn(rd)
    rd = list(rd)
    if not rd:
        raise ValueError("no RD curves")
    return finite_mean([fn(curve) for curve in rd])


def dataset_curves(curves: Mapping[CurveKey, RdCurve]) -> List[RdCurve]:
    """Per-image curves when any exist, otherwise the aggregate curve alone."""
    per_image = [c for key, c in curves.items() if key != AGGREGATE_ID]
    if per_image:
        return per_image
    if AGGREGATE_ID in curves:
        return [curves[AGGREGATE_ID]]
    raise ValueError("no RD curves")


def capacity_bits(snr_db: float, k: int, gain2: Union[float, np.ndarray] = 1.0):
    """k log2(1 + |h|^2 10^(snr/10)) bits over k complex channel uses."""
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    snr = 10.0 ** (snr_db / 10.0)
    if np.ndim(gain2):
        return k * np.log2(1.0 + np.asarray(gain2, dtype=np.float64) * snr)
    return float(k * math.log2(1.0 + float(gain2) * snr))


def capacity_bound_psnr(snr_db: float, k: int, n: int, rd: Curves) -> float:
    """
    PSNR at the capacity rate capacity_bits / n bpp.

    Args:
        snr_db: Channel SNR
        k: Channel uses
        n: Source dimension (pixels x channels)
        rd: One curve or a dataset of curves (averaged)
    """
    bpp = capacity_bits(snr_db, k) / n
    return _over_curves(rd, lambda curve: _psnr_or_fallback(curve, bpp))


def _curve_for(curves: Mapping[CurveKey, RdCurve], image_id: int) -> RdCurve:
    curve = curves.get(image_id, curves.get(AGGREGATE_ID))
    if curve is None:
        raise ConfigurationError(f"no RD curve for image {image_id} and no aggregate curve")
    return curve


def _fading_gains(channel: ChannelConfig, ids: Tuple[int, ...], realization: int) -> np.ndarray:
    rngs = ChannelStreams(channel.seed, ids, realization).rng(0, LINK_FADING)
    return np.abs(draw_fading(len(ids), channel.fading_variance, rngs)) ** 2


def fading_capacity_bound_psnr(
    snr_db: float,
    k: int,
    n: int,
    curves: Mapping[CurveKey, RdCurve],
    channel: ChannelConfig,
    image_ids: Sequence[int],
    realization: int = 0,
) -> float:
    """
    Dataset mean of the capacity bound at each image's instantaneous capacity.

    The gains come from the fading stream keyed like the JSCC evaluation, so
    image i sees the same |h|^2 in both. Images without their own curve use
    the aggregate curve.
    """
    ids = tuple(int(i) for i in image_ids)
    gains = _fading_gains(channel, ids, realization)
    values = [
        _psnr_or_fallback(_curve_for(curves, image_id), capacity_bits(snr_db, k, float(gain2)) / n)
        for image_id, gain2 in zip(ids, gains)
    ]
    return finite_mean(values)


def capacity_bound_records(
    snr_db: float,
    k: int,
    n: int,
    curves: Mapping[CurveKey, RdCurve],
    image_ids: Sequence[int],
    channel: Optional[ChannelConfig] = None,
    realizations: int = 1,
) -> pd.DataFrame:
    """
    Per-image capacity bound as (image_id, realization, psnr_db) rows, the
    separation side of a per-image gap distribution.

    On a slow Rayleigh channel every realization uses that image's gain from
    the evaluation's fading stream; otherwise one realization at gain 1.
    """
    ids = tuple(int(i) for i in image_ids)
    fading = channel is not None and channel.forward_kind == "rayleigh_slow"
    rows = []
    for r in range(realizations if fading else 1):
        gains = _fading_gains(channel, ids, r) if fading else np.ones(len(ids))
        for image_id, gain2 in zip(ids, gains):
            value = _psnr_or_fallback(_curve_for(curves, image_id), capacity_bits(snr_db, k, float(gain2)) / n)
            rows.append((image_id, r, value))
    return pd.DataFrame(rows, columns=["image_id", "realization", "psnr_db"])


def digital_max_rate(config: DigitalConfig, k: int, n: int) -> float:
    """R_max = k * code_rate * bits_per_symbol / n bpp."""
    return k * config.code_rate * config.bits_per_symbol / n


def digital_scheme_psnr(config: DigitalConfig, snr_db: float, k: int, n: int, rd: Curves) -> float:
    """
    Expected PSNR (1 - eps) PSNR(R) + eps PSNR_fail at the largest RD rate
    R <= R_max, eps the configuration's frame error rate at ``snr_db``.

    Raises:
        ConfigurationError: If eps is missing for ``snr_db``
    """
    eps = config.fer_at(snr_db)
    r_max = digital_max_rate(config, k, n)

    def expected(curve: RdCurve) -> float:
        if eps == 1.0:
            return _fallback(curve)
        success = _psnr_or_fallback(curve, r_max)
        if eps == 0.0:
            return success
        return (1.0 - eps) * success + eps * _fallback(curve)

    return _over_curves(rd, expected)


@dataclass
class Envelope:
    psnr_db: np.ndarray
    best: List[str]


def envelope(curves: Mapping[str, Sequence[float]]) -> Envelope:
    """
    Pointwise maximum of configuration curves over a shared SNR grid; ties go
    to the first configuration.
    """
    if not curves:
        raise ValueError("envelope needs at least one configuration")
    names = list(curves)
    table = np.asarray([np.asarray(curves[name], dtype=np.float64) for name in names])
    winners = np.argmax(table, axis=0)
    return Envelope(table[winners, np.arange(table.shape[1])], [names[i] for i in winners])


@dataclass
class SeparationBandwidth:
    image_id: CurveKey
    bits: float
    channel_uses: float
    reachable: bool


def varlen_separation_bandwidth(target_psnr: float, snr_db: float, rd: RdCurve, n: int) -> SeparationBandwidth:
    """
    Channel uses to deliver the smallest RD rate reaching ``target_psnr``.

    A target below the curve's lowest PSNR uses the lowest rate; a target above
    its highest PSNR is unreachable (bits and channel uses are nan).
    """
    if rd.empty:
        raise ValueError(f"RD curve {rd.image_id} has no points")
    hits = np.nonzero(np.asarray(rd.psnrs) >= target_psnr)[0]
    if len(hits) == 0:
        return SeparationBandwidth(rd.image_id, math.nan, math.nan, False)
    bits = n * rd.rates[int(hits[0])]
    return SeparationBandwidth(rd.image_id, bits, bits / math.log2(1.0 + 10.0 ** (snr_db / 10.0)), True)


def average_separation_bandwidth_ratio(
    target_psnr: float, snr_db: float, curves: Sequence[RdCurve], n: int
) -> Tuple[float, int]:
    """Mean channel uses / n over reachable curves, and the unreachable count."""
    results = [varlen_separation_bandwidth(target_psnr, snr_db, curve, n) for curve in curves]
    reachable = [r.channel_uses / n for r in results if r.reachable]
    unreachable = len(results) - len(reachable)
    if unreachable:
        logger.warning(f"{unreachable} of {len(results)} images cannot reach {target_psnr} dB")
    return (float(np.mean(reachable)) if reachable else math.nan), unreachable


def separation_bandwidth_table(
    snr_grid: Sequence[float],
    targets: Sequence[float],
    curves: Mapping[CurveKey, RdCurve],
    n: int,
) -> pd.DataFrame:
    """
    baseline_varlen.csv rows (snr_db, target_db, mean_bandwidth_ratio,
    unreachable): the separation counterpart of the variable-length summary.
    """
    members = dataset_curves(curves)
    rows = []
    for s in snr_grid:
        for target in targets:
            ratio, unreachable = average_separation_bandwidth_ratio(float(target), float(s), members, n)
            rows.append((float(s), float(target), ratio, unreachable))
    return pd.DataFrame(rows, columns=["snr_db", "target_db", "mean_bandwidth_ratio", "unreachable"])


def baseline_table(
    snr_grid: Sequence[float],
    k: int,
    n: int,
    curves: Mapping[CurveKey, RdCurve],
    configs: Sequence[DigitalConfig] = (),
    channel: Optional[ChannelConfig] = None,
    image_ids: Optional[Sequence[int]] = None,
) -> pd.DataFrame:
    """
    baseline.csv rows (snr_db, scheme, mean_psnr_db) for the schemes
    capacity:<codec>, digital:<codec>:<config> per configuration,
    envelope:<codec> and, on a slow Rayleigh channel, fading_capacity:<codec>.
    """
    members = dataset_curves(curves)
    codec = members[0].codec
    grid = [float(s) for s in snr_grid]
    rows = [(s, f"capacity:{codec}", capacity_bound_psnr(s, k, n, members)) for s in grid]

    digital: Dict[str, List[float]] = {}
    for config in configs:
        name = f"digital:{codec}:{config.name}"
        digital[name] = [digital_scheme_psnr(config, s, k, n, members) for s in grid]
        rows.extend(zip(grid, [name] * len(grid), digital[name]))
    if digital:
        best = envelope(digital)
        rows.extend(zip(grid, [f"envelope:{codec}"] * len(grid), best.psnr_db.tolist()))

    if channel is not None and channel.forward_kind == "rayleigh_slow":
        ids = image_ids if image_ids is not None else [c.image_id for c in members if c.image_id != AGGREGATE_ID]
        if not ids:
            raise ConfigurationError("the fading bound needs image ids")
        rows.extend(
            (s, f"fading_capacity:{codec}", fading_capacity_bound_psnr(s, k, n, curves, channel, ids))
            for s in grid
        )
    logger.info(f"Baseline table: {len(rows)} rows over {len(grid)} SNRs")
    return pd.DataFrame(rows, columns=["snr_db", "scheme", "mean_psnr_db"])
