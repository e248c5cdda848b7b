"""Architecture description and its dimension bookkeeping."""

from dataclasses import dataclass
from typing import Optional, Tuple

from JSCCF.errors import ConfigurationError, ShapeError
from JSCCF.model.config.config import (
    DEFAULT_CHANNELS,
    DEFAULT_COMBINER_WIDTHS,
    DEFAULT_DECODER_WIDTHS,
    DEFAULT_ENCODER_WIDTHS,
    DEFAULT_HEIGHT,
    DEFAULT_KERNEL_SIZE,
    DEFAULT_WIDTH,
    DOWNSAMPLING,
)


@dataclass(frozen=True)
class ArchSpec:
    """
    Layer count, per-layer channel uses and block hyperparameters.

    Each layer j sends k_j complex symbols, i.e. 2 k_j reals, laid out as an
    (H/4) x (W/4) x c_j latent. ``c_j`` must therefore be a positive integer.

    Raises:
        ConfigurationError: On any violated dimension rule
    """
    channel_uses: Tuple[int, ...]
    height: int = DEFAULT_HEIGHT
    width: int = DEFAULT_WIDTH
    channels: int = DEFAULT_CHANNELS
    kernel_size: int = DEFAULT_KERNEL_SIZE
    encoder_widths: Tuple[int, ...] = DEFAULT_ENCODER_WIDTHS
    decoder_widths: Tuple[int, ...] = DEFAULT_DECODER_WIDTHS
    combiner_widths: Tuple[int, ...] = DEFAULT_COMBINER_WIDTHS
    total_channel_uses: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "channel_uses", tuple(int(k) for k in self.channel_uses))
        for name in ("encoder_widths", "decoder_widths", "combiner_widths"):
            object.__setattr__(self, name, tuple(int(w) for w in getattr(self, name)))

        if not self.channel_uses:
            raise ConfigurationError("at least one layer is required")
        if self.height % DOWNSAMPLING or self.width % DOWNSAMPLING:
            raise ConfigurationError(
                f"image dims {self.height}x{self.width} must be divisible by {DOWNSAMPLING}"
            )
        if self.channels < 1 or self.kernel_size < 1:
            raise ConfigurationError("channels and kernel_size must be positive")
        if len(self.encoder_widths) != 3 or len(self.decoder_widths) != 3 or len(self.combiner_widths) != 2:
            raise ConfigurationError("expected 3 encoder, 3 decoder and 2 combiner hidden widths")
        if min(self.encoder_widths + self.decoder_widths + self.combiner_widths) < 1:
            raise ConfigurationError("block widths must be positive")

        area = self.latent_area
        for j, k in enumerate(self.channel_uses, start=1):
            if k < 1 or (2 * k) % area:
                raise ConfigurationError(
                    f"layer {j}: 2*k_j = {2 * k} is not a positive multiple of "
                    f"(H/4)*(W/4) = {area}"
                )
        if self.total_channel_uses is not None and self.total_channel_uses != self.k:
            raise ConfigurationError(
                f"per-layer channel uses sum to {self.k}, expected {self.total_channel_uses}"
            )

    @classmethod
    def from_bandwidth_ratio(cls, ratio: float, layers: int, **kwargs) -> "ArchSpec":
        """Split k = round(ratio * n) channel uses equally over ``layers``."""
        height = kwargs.get("height", DEFAULT_HEIGHT)
        width = kwargs.get("width", DEFAULT_WIDTH)
        channels = kwargs.get("channels", DEFAULT_CHANNELS)
        if layers < 1:
            raise ConfigurationError(f"layers must be >= 1, got {layers}")
        k = int(round(ratio * height * width * channels))
        if k % layers:
            raise ConfigurationError(f"{k} channel uses cannot be split equally over {layers} layers")
        return cls(channel_uses=(k // layers,) * layers, total_channel_uses=k, **kwargs)

    @property
    def layers(self) -> int:
        return len(self.channel_uses)

    @property
    def latent_area(self) -> int:
        return (self.height // DOWNSAMPLING) * (self.width // DOWNSAMPLING)

    @property
    def latent_channels(self) -> Tuple[int, ...]:
        """c_j = 2 k_j / ((H/4)(W/4))."""
        return tuple(2 * k // self.latent_area for k in self.channel_uses)

    @property
    def n(self) -> int:
        return self.height * self.width * self.channels

    @property
    def k(self) -> int:
        return sum(self.channel_uses)

    @property
    def bandwidth_ratio(self) -> float:
        return self.k / self.n

    def channel_uses_at(self, height: int, width: int) -> Tuple[int, ...]:
        """k_j for an input of a different size: c_j (H'/4)(W'/4) / 2."""
        check_image_dims(height, width)
        area = (height // DOWNSAMPLING) * (width // DOWNSAMPLING)
        if any(c * area % 2 for c in self.latent_channels):
            raise ShapeError(f"a {height}x{width} input gives an odd number of latent reals")
        return tuple(c * area // 2 for c in self.latent_channels)


def check_image_dims(height: int, width: int) -> None:
    if height % DOWNSAMPLING or width % DOWNSAMPLING or height < 1 or width < 1:
        raise ShapeError(f"image dims {height}x{width} must be positive multiples of {DOWNSAMPLING}")
