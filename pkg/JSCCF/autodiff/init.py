"""Seeded parameter initializers for convolution, GDN and PReLU blocks."""

import numpy as np

from JSCCF.autodiff.config.config import (
    DEFAULT_DTYPE,
    GDN_BETA_INIT,
    GDN_BETA_MIN,
    GDN_GAMMA_INIT,
    GDN_GAMMA_MIN,
    PRELU_INIT_SLOPE,
)
from JSCCF.autodiff.tensor import Tensor


def conv_kernel(rng: np.random.Generator, shape, name: str, dtype=DEFAULT_DTYPE) -> Tensor:
    """Uniform in [-b, b] with b = sqrt(3 / fan_in), fan_in = h * w * Cin."""
    kh, kw, cin, _ = shape
    bound = np.sqrt(3.0 / (kh * kw * cin))
    return Tensor(rng.uniform(-bound, bound, size=shape).astype(dtype), name=name)


def conv_bias(channels: int, name: str, dtype=DEFAULT_DTYPE) -> Tensor:
    return Tensor(np.zeros(channels, dtype=dtype), name=name)


def gdn_beta(channels: int, name: str, dtype=DEFAULT_DTYPE) -> Tensor:
    return Tensor(np.full(channels, GDN_BETA_INIT, dtype=dtype), name=name, floor=GDN_BETA_MIN)


def gdn_gamma(channels: int, name: str, dtype=DEFAULT_DTYPE) -> Tensor:
    return Tensor(GDN_GAMMA_INIT * np.eye(channels, dtype=dtype), name=name, floor=GDN_GAMMA_MIN)


def prelu_slope(channels: int, name: str, dtype=DEFAULT_DTYPE) -> Tensor:
    return Tensor(np.full(channels, PRELU_INIT_SLOPE, dtype=dtype), name=name)
