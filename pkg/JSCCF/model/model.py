"""
Layered JSCC Model Module

This module holds the L-layer transmission pipeline with channel output
feedback:
- JsccModel: per-layer encoder, decoder and combiner blocks plus freeze flags
- encode_layer: (x, previous transmitter estimate) -> power-normalized symbols
- decode_layer: all channel outputs so far -> refinement u_j
- combine_layer: (previous reconstruction, u_j) -> reconstruction x_j
- reconstruct / tx_estimate: the receiver recursion, applied either to
  channel outputs (receiver) or to feedback signals (transmitter estimate)
- transmit_trace: one end-to-end pass with a forward and a feedback link

The receiver and the transmitter estimate share one code path and one set of
weights, so with noiseless feedback they agree bit for bit.
"""

import logging
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from JSCCF.autodiff import functional as F
from JSCCF.autodiff.config.config import DEFAULT_DTYPE
from JSCCF.autodiff.tensor import Tensor
from JSCCF.channel.channel import (
    ChannelConfig,
    ChannelDraw,
    ChannelSession,
    ChannelStreams,
    ComplexSignal,
    pack_complex,
    power_normalize,
    unpack_complex,
)
from JSCCF.errors import ShapeError, UsageError
from JSCCF.model.arch import ArchSpec, check_image_dims
from JSCCF.model.blocks import ConvBlock, build_stack, run_stack
from JSCCF.model.config.config import DECODER_STRIDES, DOWNSAMPLING, ENCODER_STRIDES

logger = logging.getLogger("JSCCF.model.model")

ImageLike = Union[Tensor, np.ndarray]


class JsccModel:
    """Encoders f_j, decoders g_j and combiners c_j (j >= 2) for L layers."""

    def __init__(
        self,
        spec: ArchSpec,
        encoders: List[List[ConvBlock]],
        decoders: List[List[ConvBlock]],
        combiners: List[Optional[List[ConvBlock]]],
        trained: Optional[List[bool]] = None,
        dtype=DEFAULT_DTYPE,
    ):
        self.spec = spec
        self.encoders = encoders
        self.decoders = decoders
        self.combiners = combiners
        self.trained = list(trained) if trained is not None else [False] * spec.layers
        self.dtype = np.dtype(dtype)

    @property
    def layers(self) -> int:
        return self.spec.layers

    def check_layer(self, j: int) -> None:
        if not 1 <= j <= self.layers:
            raise UsageError(f"layer index {j} outside 1..{self.layers}")

    def layer_parameters(self, j: int) -> Dict[str, Tensor]:
        """theta_j, phi_j and psi_j keyed by parameter name."""
        self.check_layer(j)
        params: Dict[str, Tensor] = OrderedDict()
        stacks = [self.encoders[j - 1], self.decoders[j - 1], self.combiners[j - 1] or []]
        for stack in stacks:
            for block in stack:
                params.update(block.parameters())
        return params

    def parameters(self) -> Dict[str, Tensor]:
        params: Dict[str, Tensor] = OrderedDict()
        for j in range(1, self.layers + 1):
            params.update(self.layer_parameters(j))
        return params

    def set_trainable(self, j: Optional[int]) -> None:
        """Give gradients to layer ``j`` only (``None`` freezes everything)."""
        for i in range(1, self.layers + 1):
            for param in self.layer_parameters(i).values():
                param.requires_grad = i == j
                if i != j:
                    param.grad = None

    def latent_grid(self, height: int, width: int) -> Tuple[int, int]:
        check_image_dims(height, width)
        return height // DOWNSAMPLING, width // DOWNSAMPLING


def build_model(spec: ArchSpec, seed: int = 0, dtype=DEFAULT_DTYPE) -> JsccModel:
    """
    Initialize every block of an L-layer model from one seeded generator.

    Args:
        spec: Validated architecture
        seed: Initialization seed
        dtype: Parameter precision (32-bit for training, 64-bit for checks)

    Returns:
        A fresh JsccModel with all layers untrained
    """
    rng = np.random.default_rng(seed)
    c, ks = spec.channels, spec.kernel_size
    encoders, decoders, combiners = [], [], []
    for j, latent in enumerate(spec.latent_channels, start=1):
        in_channels = c if j == 1 else 2 * c
        encoders.append(build_stack(
            rng, f"enc{j}", (in_channels, *spec.encoder_widths, latent), ENCODER_STRIDES,
            ks, transposed=False, last_activation="linear", dtype=dtype,
        ))
        received = sum(spec.latent_channels[:j])
        decoders.append(build_stack(
            rng, f"dec{j}", (received, *spec.decoder_widths, c), DECODER_STRIDES,
            ks, transposed=True, last_activation="sigmoid", dtype=dtype,
        ))
        if j == 1:
            combiners.append(None)
        else:
            combiners.append(build_stack(
                rng, f"comb{j}", (2 * c, *spec.combiner_widths, c), (1, 1, 1),
                ks, transposed=False, last_activation="sigmoid", dtype=dtype,
            ))
    model = JsccModel(spec, encoders, decoders, combiners, dtype=dtype)
    logger.info(
        f"Built {spec.layers}-layer model: k_j={spec.channel_uses}, c_j={spec.latent_channels}, "
        f"{sum(p.size for p in model.parameters().values())} parameters"
    )
    return model


def as_image(model: JsccModel, x: ImageLike) -> Tensor:
    """Wrap an N x H x W x C batch in the model's precision, checking dims."""
    tensor = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=model.dtype))
    if tensor.ndim != 4:
        raise ShapeError(f"images must be N x H x W x C, got shape {tensor.shape}")
    if tensor.shape[3] != model.spec.channels:
        raise ShapeError(f"expected {model.spec.channels} image channels, got {tensor.shape[3]}")
    check_image_dims(tensor.shape[1], tensor.shape[2])
    return tensor


def encode_layer(
    model: JsccModel,
    j: int,
    x: ImageLike,
    x_prev: Optional[ImageLike] = None,
) -> ComplexSignal:
    """
    Produce layer j's channel input y_j = f_j(x, x_tilde_{j-1}).

    The encoder receives the image and the previous transmitter estimate
    concatenated on the channel axis; layer 1 sees the image alone.

    Raises:
        UsageError: If the estimate is missing for j >= 2 or given for j = 1
        ShapeError: If the estimate does not match the image dims
    """
    model.check_layer(j)
    x = as_image(model, x)
    if j == 1 and x_prev is not None:
        raise UsageError("layer 1 takes no transmitter estimate")
    if j > 1 and x_prev is None:
        raise UsageError(f"layer {j} needs the transmitter estimate of layer {j - 1}")
    inputs = x
    if x_prev is not None:
        x_prev = as_image(model, x_prev)
        if x_prev.shape != x.shape:
            raise ShapeError(f"estimate shape {x_prev.shape} does not match image {x.shape}")
        inputs = F.concat_channels([x, x_prev])

    latent = run_stack(model.encoders[j - 1], inputs)
    n = latent.shape[0]
    flat = F.reshape(latent, (n, latent.size // n))
    return power_normalize(pack_complex(flat))


def _infer_grid(model: JsccModel, signal: ComplexSignal, latent: int) -> Tuple[int, int]:
    area = 2 * signal.k // latent
    if area == model.spec.latent_area:
        return model.spec.height // DOWNSAMPLING, model.spec.width // DOWNSAMPLING
    side = math.isqrt(area)
    if side * side != area:
        raise UsageError("pass image_size for non-square inputs of a non-native size")
    return side, side


def decode_layer(
    model: JsccModel,
    j: int,
    outputs: Sequence[ComplexSignal],
    image_size: Optional[Tuple[int, int]] = None,
) -> Tensor:
    """
    Compute u_j = g_j(z_1, ..., z_j).

    Each z_i is unpacked, reshaped to (H/4) x (W/4) x c_i and concatenated on
    the channel axis before the decoder stack; the output is in (0, 1).

    Raises:
        UsageError: If fewer than j channel outputs are supplied
    """
    model.check_layer(j)
    if len(outputs) < j:
        raise UsageError(f"layer {j} needs {j} channel outputs, got {len(outputs)}")
    latents = model.spec.latent_channels
    if image_size is None:
        grid = _infer_grid(model, outputs[0], latents[0])
    else:
        grid = model.latent_grid(*image_size)

    features = []
    for i, signal in enumerate(outputs[:j]):
        reals = unpack_complex(signal)
        n = reals.shape[0]
        expected = grid[0] * grid[1] * latents[i]
        if reals.shape[1] != expected:
            raise ShapeError(f"layer {i + 1} output has {reals.shape[1]} reals, expected {expected}")
        reals = F.cast(reals, model.dtype)
        features.append(F.reshape(reals, (n, grid[0], grid[1], latents[i])))
    return run_stack(model.decoders[j - 1], F.concat_channels(features))


def combine_layer(model: JsccModel, j: int, x_hat_prev: Tensor, u_j: Tensor) -> Tensor:
    """
    x_hat_j = c_j(x_hat_{j-1}, u_j) for j >= 2.

    Raises:
        UsageError: For j = 1, where x_hat_1 = u_1 without a combiner
    """
    model.check_layer(j)
    if j == 1:
        raise UsageError("layer 1 has no combiner (x_hat_1 = u_1)")
    if x_hat_prev.shape != u_j.shape:
        raise ShapeError(f"combiner inputs differ in shape: {x_hat_prev.shape} vs {u_j.shape}")
    return run_stack(model.combiners[j - 1], F.concat_channels([x_hat_prev, u_j]))


def reconstruct(
    model: JsccModel,
    j: int,
    signals: Sequence[ComplexSignal],
    previous: Optional[Tensor] = None,
    image_size: Optional[Tuple[int, int]] = None,
) -> Tensor:
    """
    Reconstruction after j layers from signals s_1..s_j.

    ``previous`` is the reconstruction after j - 1 layers; when omitted for
    j >= 2 it is recomputed recursively from the same signals.
    """
    model.check_layer(j)
    if len(signals) < j:
        raise UsageError(f"layer {j} needs {j} signals, got {len(signals)}")
    u = decode_layer(model, j, signals, image_size)
    if j == 1:
        return u
    if previous is None:
        previous = reconstruct(model, j - 1, signals, image_size=image_size)
    return combine_layer(model, j, previous, u)


def tx_estimate(
    model: JsccModel,
    j: int,
    feedback: Sequence[ComplexSignal],
    previous: Optional[Tensor] = None,
    image_size: Optional[Tuple[int, int]] = None,
) -> Tensor:
    """
    Transmitter-side estimate x_tilde_j: the receiver's decoders and combiners
    applied to the feedback signals w_1..w_j.

    Raises:
        UsageError: If feedback for some layer <= j is missing
    """
    if len(feedback) < j:
        raise UsageError(f"estimate of layer {j} needs {j} feedback signals, got {len(feedback)}")
    return reconstruct(model, j, feedback, previous, image_size)


@dataclass
class LayerRecord:
    layer: int
    y: ComplexSignal
    z: ComplexSignal
    u_hat: Tensor
    x_hat: Tensor
    channel_uses: int
    w: Optional[ComplexSignal] = None
    x_tilde: Optional[Tensor] = None


@dataclass
class TransmissionTrace:
    records: List[LayerRecord]
    draw: ChannelDraw
    feedback_ablation: bool = False
    image_shape: Tuple[int, ...] = field(default=())

    @property
    def channel_uses(self) -> int:
        return self.records[-1].channel_uses if self.records else 0

    @property
    def reconstructions(self) -> List[Tensor]:
        return [record.x_hat for record in self.records]


def transmit_trace(
    model: JsccModel,
    x: ImageLike,
    channel: ChannelConfig,
    streams: Optional[ChannelStreams] = None,
    upto: Optional[int] = None,
    feedback_ablation: bool = False,
    full_feedback: bool = False,
) -> TransmissionTrace:
    """
    Send a batch through layers 1..upto (default L).

    For each layer: encode, forward channel, decode and combine; then, if a
    later layer will be sent (or ``full_feedback``), the feedback link and the
    transmitter estimate. The fading gain is drawn once per call and reused by
    every layer.

    Args:
        model: Model to run
        x: Images N x H x W x C in [0, 1]
        channel: Channel configuration
        streams: Noise streams; defaults to one stream per image index 0..N-1,
            realization 0, under ``channel.seed``
        upto: Last layer to send
        feedback_ablation: Feed all-zero images to the encoder instead of the
            transmitter estimate
        full_feedback: Also compute the estimate after the last sent layer

    Returns:
        TransmissionTrace with one LayerRecord per sent layer
    """
    x = as_image(model, x)
    last = model.layers if upto is None else upto
    model.check_layer(last)
    n = x.shape[0]
    if streams is None:
        streams = ChannelStreams(channel.seed, tuple(range(n)))
    session = ChannelSession(channel, streams, n)
    image_size = (x.shape[1], x.shape[2])
    zero_image = F.zeros_like(x) if feedback_ablation else None

    records: List[LayerRecord] = []
    outputs: List[ComplexSignal] = []
    feedback: List[ComplexSignal] = []
    x_hat: Optional[Tensor] = None
    x_tilde: Optional[Tensor] = None
    used = 0
    for j in range(1, last + 1):
        estimate = None if j == 1 else (zero_image if feedback_ablation else x_tilde)
        y = encode_layer(model, j, x, estimate)
        z = session.forward(y, j)
        outputs.append(z)
        used += y.k
        u = decode_layer(model, j, outputs, image_size)
        x_hat = u if j == 1 else combine_layer(model, j, x_hat, u)
        record = LayerRecord(layer=j, y=y, z=z, u_hat=u, x_hat=x_hat, channel_uses=used)
        if j < last or full_feedback:
            w = session.feedback(z, j)
            feedback.append(w)
            x_tilde = tx_estimate(model, j, feedback, x_tilde, image_size)
            record.w, record.x_tilde = w, x_tilde
        records.append(record)
        logger.debug(f"Layer {j}: {y.k} symbols sent, {used} channel uses so far")

    return TransmissionTrace(records, session.draw, feedback_ablation, tuple(x.shape))
