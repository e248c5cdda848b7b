"""
Convolutional blocks shared by the encoders, decoders and combiners.

A block is one convolution (strided down, or transposed up) optionally
followed by (I)GDN and PReLU, or by a sigmoid.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from JSCCF.autodiff import functional as F
from JSCCF.autodiff import init
from JSCCF.autodiff.tensor import Tensor


@dataclass
class ConvBlock:
    name: str
    kernel: Tensor
    bias: Tensor
    stride: int
    transposed: bool = False
    activation: str = "prelu"  # "prelu" (with (I)GDN), "sigmoid" or "linear"
    inverse_gdn: bool = False
    gdn_beta: Optional[Tensor] = None
    gdn_gamma: Optional[Tensor] = None
    slope: Optional[Tensor] = None

    def __call__(self, x: Tensor) -> Tensor:
        conv = F.conv2d_up if self.transposed else F.conv2d_down
        out = conv(x, self.kernel, self.bias, stride=self.stride)
        if self.activation == "prelu":
            out = F.gdn(out, self.gdn_beta, self.gdn_gamma, inverse=self.inverse_gdn)
            return F.prelu(out, self.slope)
        if self.activation == "sigmoid":
            return F.sigmoid(out)
        return out

    def parameters(self) -> Dict[str, Tensor]:
        params = {"kernel": self.kernel, "bias": self.bias}
        if self.activation == "prelu":
            params.update(gdn_beta=self.gdn_beta, gdn_gamma=self.gdn_gamma, prelu=self.slope)
        return {f"{self.name}.{key}": value for key, value in params.items()}


def build_block(
    rng: np.random.Generator,
    name: str,
    in_channels: int,
    out_channels: int,
    kernel_size: int,
    stride: int,
    transposed: bool = False,
    activation: str = "prelu",
    dtype=np.float32,
) -> ConvBlock:
    shape = (kernel_size, kernel_size, in_channels, out_channels)
    block = ConvBlock(
        name=name,
        kernel=init.conv_kernel(rng, shape, f"{name}.kernel", dtype),
        bias=init.conv_bias(out_channels, f"{name}.bias", dtype),
        stride=stride,
        transposed=transposed,
        activation=activation,
        inverse_gdn=transposed,
    )
    if activation == "prelu":
        block.gdn_beta = init.gdn_beta(out_channels, f"{name}.gdn_beta", dtype)
        block.gdn_gamma = init.gdn_gamma(out_channels, f"{name}.gdn_gamma", dtype)
        block.slope = init.prelu_slope(out_channels, f"{name}.prelu", dtype)
    return block


def build_stack(
    rng: np.random.Generator,
    prefix: str,
    widths: Sequence[int],
    strides: Sequence[int],
    kernel_size: int,
    transposed: bool,
    last_activation: str,
    dtype=np.float32,
) -> List[ConvBlock]:
    """Chain blocks widths[0] -> widths[1] -> ...; the last uses ``last_activation``."""
    blocks = []
    for b, stride in enumerate(strides):
        last = b == len(strides) - 1
        blocks.append(build_block(
            rng, f"{prefix}.{b}", widths[b], widths[b + 1], kernel_size, stride,
            transposed=transposed,
            activation=last_activation if last else "prelu",
            dtype=dtype,
        ))
    return blocks


def run_stack(blocks: Sequence[ConvBlock], x: Tensor) -> Tensor:
    for block in blocks:
        x = block(x)
    return x
