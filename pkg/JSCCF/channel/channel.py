"""
Channel Simulation Module

Complex-baseband forward and feedback links for batches of channel inputs.

Components:
- ComplexSignal: k complex symbols per row, stored as interleaved
  (real, imaginary) pairs in a Tensor so gradients flow through the channel
- pack_complex / unpack_complex / power_normalize: signal preparation
- awgn_transmit / rayleigh_transmit / feedback_transmit: the links
- ChannelConfig: channel kinds, SNRs and fading variance
- ChannelStreams: keyed random generators, one stream per
  (seed, image, realization, layer, link)
- ChannelSession: one batch's draw (fading gain and recorded noise), used by
  the transmission trace

Noise is circularly symmetric: total variance sigma^2 per complex symbol,
sigma^2 / 2 per real component. An SNR of +inf is the noiseless sentinel and
bypasses sampling entirely.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from JSCCF.autodiff import functional as F
from JSCCF.autodiff.tensor import Tensor
from JSCCF.channel.config.config import (
    DEFAULT_FADING_VARIANCE,
    DEFAULT_FEEDBACK_KIND,
    DEFAULT_FEEDBACK_SNR_DB,
    DEFAULT_FORWARD_KIND,
    DEFAULT_FORWARD_SNR_DB,
    DEFAULT_SEED,
    FEEDBACK_KINDS,
    FORWARD_KINDS,
    LINK_FADING,
    LINK_FEEDBACK,
    LINK_FORWARD,
)
from JSCCF.errors import ConfigurationError, ShapeError

logger = logging.getLogger("JSCCF.channel.channel")

RngLike = Union[np.random.Generator, Sequence[np.random.Generator]]


def snr_to_sigma2(snr_db: float) -> float:
    """Noise variance per complex symbol for unit signal power; +inf dB gives 0."""
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return 10.0 ** (-snr_db / 10.0)


@dataclass
class ComplexSignal:
    """Complex channel symbols as a (..., 2k) Tensor of interleaved pairs."""
    pairs: Tensor

    @property
    def k(self) -> int:
        return self.pairs.shape[-1] // 2

    @property
    def symbols(self) -> np.ndarray:
        data = self.pairs.data
        return data[..., 0::2] + 1j * data[..., 1::2]

    @property
    def average_power(self) -> np.ndarray:
        """(1/k) * sum |y_i|^2 along the last axis."""
        data = self.pairs.data.astype(np.float64)
        return np.sum(data * data, axis=-1) / self.k

    @classmethod
    def from_symbols(cls, symbols) -> "ComplexSignal":
        symbols = np.asarray(symbols)
        pairs = np.empty(symbols.shape[:-1] + (2 * symbols.shape[-1],), dtype=np.float64)
        pairs[..., 0::2] = symbols.real
        pairs[..., 1::2] = symbols.imag
        return cls(Tensor(pairs))


def pack_complex(values: Union[Tensor, np.ndarray, Sequence[float]]) -> ComplexSignal:
    """
    Pair consecutive reals (r_2i, r_2i+1) into complex symbols.

    Args:
        values: A length-2k vector or an N x 2k batch of rows

    Raises:
        ShapeError: If the last extent is odd or the rank is not 1 or 2
    """
    tensor = values if isinstance(values, Tensor) else Tensor(np.asarray(values))
    if tensor.ndim not in (1, 2):
        raise ShapeError(f"pack_complex expects a vector or N x 2k rows, got shape {tensor.shape}")
    if tensor.shape[-1] % 2:
        raise ShapeError(f"cannot pack {tensor.shape[-1]} reals into complex symbols (odd length)")
    return ComplexSignal(tensor)


def unpack_complex(signal: ComplexSignal) -> Tensor:
    """Exact inverse of ``pack_complex``."""
    return signal.pairs


def _rows(signal: ComplexSignal) -> Tensor:
    if signal.pairs.ndim == 1:
        return F.reshape(signal.pairs, (1, signal.pairs.shape[0]))
    return signal.pairs


def _like(signal: ComplexSignal, rows: Tensor) -> ComplexSignal:
    if signal.pairs.ndim == 1:
        return ComplexSignal(F.reshape(rows, signal.pairs.shape))
    return ComplexSignal(rows)


def power_normalize(signal: ComplexSignal) -> ComplexSignal:
    """
    Scale each row to unit average symbol power: y = sqrt(k) * v / ||v||.

    Raises:
        DegenerateSignalError: If a row is all zeros
    """
    return _like(signal, F.power_normalize(_rows(signal)))


def complex_noise(rows: int, width: int, sigma2: float, rng: RngLike) -> np.ndarray:
    """
    Draw rows x width real components of complex Gaussian noise.

    A single generator fills the whole block; a sequence of generators gives
    one independent stream per row.
    """
    scale = np.sqrt(sigma2 / 2.0)
    if isinstance(rng, np.random.Generator):
        return scale * rng.standard_normal((rows, width))
    if len(rng) != rows:
        raise ShapeError(f"{len(rng)} noise streams for {rows} rows")
    return scale * np.stack([g.standard_normal(width) for g in rng])


def add_noise(signal: ComplexSignal, noise: Optional[np.ndarray]) -> ComplexSignal:
    if noise is None:
        return signal
    rows = _rows(signal)
    if noise.shape != rows.shape:
        raise ShapeError(f"noise shape {noise.shape} does not match signal {rows.shape}")
    return _like(signal, F.add_constant(rows, noise))


@dataclass
class ChannelDraw:
    """Fading gains (ones for AWGN) plus every noise block drawn so far, keyed by (layer, link)."""
    h: np.ndarray
    noise: Dict[Tuple[int, int], np.ndarray] = field(default_factory=dict)


def _draw(
    signal: ComplexSignal,
    snr_db: float,
    rng: RngLike,
    draw: Optional[ChannelDraw] = None,
    key: Optional[Tuple[int, int]] = None,
) -> Optional[np.ndarray]:
    sigma2 = snr_to_sigma2(snr_db)
    if sigma2 == 0.0:
        return None
    rows = _rows(signal)
    noise = complex_noise(rows.shape[0], rows.shape[1], sigma2, rng)
    if draw is not None and key is not None:
        draw.noise[key] = noise
    return noise


def awgn_transmit(
    y: ComplexSignal,
    snr_db: float,
    rng: RngLike,
    draw: Optional[ChannelDraw] = None,
    key: Optional[Tuple[int, int]] = None,
) -> ComplexSignal:
    """z = y + n with n ~ CN(0, sigma^2) per symbol; the noise is kept in ``draw.noise[key]`` when given."""
    return add_noise(y, _draw(y, snr_db, rng, draw, key))


def draw_fading(rows: int, fading_variance: float, rng: RngLike) -> np.ndarray:
    """One complex gain per row from CN(0, H_c)."""
    scale = np.sqrt(fading_variance / 2.0)
    if isinstance(rng, np.random.Generator):
        parts = rng.standard_normal((rows, 2))
    else:
        if len(rng) != rows:
            raise ShapeError(f"{len(rng)} fading streams for {rows} rows")
        parts = np.stack([g.standard_normal(2) for g in rng])
    return scale * (parts[:, 0] + 1j * parts[:, 1])


def rayleigh_transmit(
    y: ComplexSignal,
    draw: ChannelDraw,
    snr_db: float,
    rng: RngLike,
    key: Optional[Tuple[int, int]] = None,
) -> ComplexSignal:
    """z = h * y + n; h comes from ``draw`` and is not revealed to the receiver."""
    faded = _like(y, F.complex_gain(_rows(y), np.asarray(draw.h).reshape(-1)))
    return add_noise(faded, _draw(y, snr_db, rng, draw, key))


def feedback_transmit(
    z: ComplexSignal,
    feedback_snr_db: Optional[float],
    rng: Optional[RngLike],
    draw: Optional[ChannelDraw] = None,
    key: Optional[Tuple[int, int]] = None,
) -> ComplexSignal:
    """Noiseless (None or +inf) returns ``z`` itself; otherwise w = z + n_f."""
    if feedback_snr_db is None or snr_to_sigma2(feedback_snr_db) == 0.0:
        return z
    return awgn_transmit(z, feedback_snr_db, rng, draw, key)


@dataclass(frozen=True)
class ChannelConfig:
    forward_kind: str = DEFAULT_FORWARD_KIND
    forward_snr_db: float = DEFAULT_FORWARD_SNR_DB
    feedback_kind: str = DEFAULT_FEEDBACK_KIND
    feedback_snr_db: float = DEFAULT_FEEDBACK_SNR_DB
    fading_variance: float = DEFAULT_FADING_VARIANCE
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.forward_kind not in FORWARD_KINDS:
            raise ConfigurationError(f"forward_kind must be one of {FORWARD_KINDS}, got '{self.forward_kind}'")
        if self.feedback_kind not in FEEDBACK_KINDS:
            raise ConfigurationError(f"feedback_kind must be one of {FEEDBACK_KINDS}, got '{self.feedback_kind}'")
        if not self.fading_variance > 0:
            raise ConfigurationError(f"fading_variance must be positive, got {self.fading_variance}")
        if math.isnan(self.forward_snr_db) or math.isnan(self.feedback_snr_db):
            raise ConfigurationError("SNR values must be numbers")
        if self.seed < 0:
            raise ConfigurationError(f"seed must be non-negative, got {self.seed}")

    @property
    def feedback_noiseless(self) -> bool:
        return self.feedback_kind == "noiseless" or snr_to_sigma2(self.feedback_snr_db) == 0.0

    @property
    def effective_feedback_snr_db(self) -> float:
        return float("inf") if self.feedback_noiseless else self.feedback_snr_db

    def at(self, forward_snr_db: Optional[float] = None, feedback_snr_db: Optional[float] = None) -> "ChannelConfig":
        """Same channel at different test SNRs; +inf feedback means noiseless."""
        changes = {}
        if forward_snr_db is not None:
            changes["forward_snr_db"] = forward_snr_db
        if feedback_snr_db is not None:
            noiseless = snr_to_sigma2(feedback_snr_db) == 0.0
            changes["feedback_kind"] = "noiseless" if noiseless else "awgn"
            changes["feedback_snr_db"] = feedback_snr_db
        return replace(self, **changes)


@dataclass(frozen=True)
class ChannelStreams:
    """
    Keyed generators: default_rng([seed, image, realization, layer, link]).

    With ``per_image`` every row gets its own stream keyed by its image index;
    otherwise the whole batch shares the stream of ``image_indices[0]``.
    """
    seed: int
    image_indices: Tuple[int, ...]
    realization: int = 0
    per_image: bool = True

    def rng(self, layer: int, link: int) -> RngLike:
        if self.per_image:
            return [
                np.random.default_rng([self.seed, int(i), self.realization, layer, link])
                for i in self.image_indices
            ]
        return np.random.default_rng([self.seed, int(self.image_indices[0]), self.realization, layer, link])


class ChannelSession:
    """Forward and feedback links for one batch under one configuration."""

    def __init__(self, config: ChannelConfig, streams: ChannelStreams, rows: int):
        self.config = config
        self.streams = streams
        self.rows = rows
        if config.forward_kind == "rayleigh_slow":
            h = draw_fading(rows, config.fading_variance, streams.rng(0, LINK_FADING))
        else:
            h = np.ones(rows, dtype=np.complex128)
        self.draw = ChannelDraw(h=h)
        logger.debug(
            f"Channel session over {rows} rows: {config.forward_kind} at {config.forward_snr_db} dB, "
            f"feedback {config.effective_feedback_snr_db} dB"
        )

    def forward(self, y: ComplexSignal, layer: int) -> ComplexSignal:
        """Carry layer ``layer``'s block y over the forward link."""
        key = (layer, LINK_FORWARD)
        rng = self.streams.rng(*key)
        if self.config.forward_kind == "rayleigh_slow":
            return rayleigh_transmit(y, self.draw, self.config.forward_snr_db, rng, key)
        return awgn_transmit(y, self.config.forward_snr_db, rng, self.draw, key)

    def feedback(self, z: ComplexSignal, layer: int) -> ComplexSignal:
        """Return z to the transmitter; exact bypass when noiseless."""
        if self.config.feedback_noiseless:
            return feedback_transmit(z, None, None)
        key = (layer, LINK_FEEDBACK)
        return feedback_transmit(z, self.config.feedback_snr_db, self.streams.rng(*key), self.draw, key)

