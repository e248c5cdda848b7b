"""
Adam optimizer over named parameter tensors.

After each update, parameters carrying a ``floor`` (GDN beta and gamma) are
projected back onto it.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional

import numpy as np

from JSCCF.autodiff.config.config import (
    DEFAULT_BETA1,
    DEFAULT_BETA2,
    DEFAULT_EPSILON,
    DEFAULT_LEARNING_RATE,
)
from JSCCF.autodiff.tensor import Tensor
from JSCCF.errors import ShapeError

logger = logging.getLogger("JSCCF.autodiff.optim")


@dataclass
class AdamState:
    """First/second moment accumulators keyed by parameter name."""
    lr: float = DEFAULT_LEARNING_RATE
    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2
    epsilon: float = DEFAULT_EPSILON
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    state: AdamState,
    params: Mapping[str, Tensor],
    grads: Optional[Mapping[str, np.ndarray]] = None,
) -> AdamState:
    """
    Apply one bias-corrected Adam update in place.

    Args:
        state: Optimizer state; its step counter is incremented first
        params: Parameters to update, keyed by name
        grads: Gradients keyed like ``params``; defaults to each tensor's ``grad``

    Returns:
        The same (mutated) state

    Raises:
        ShapeError: If a gradient or stored moment does not match its parameter
    """
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step

    for name, param in params.items():
        g = grads[name] if grads is not None else param.grad
        if g is None:
            g = np.zeros_like(param.data)
        if g.shape != param.shape:
            raise ShapeError(f"gradient for '{name}' has shape {g.shape}, parameter {param.shape}")

        if name not in state.m:
            state.m[name] = np.zeros_like(param.data)
            state.v[name] = np.zeros_like(param.data)
        m, v = state.m[name], state.v[name]
        if m.shape != param.shape:
            raise ShapeError(f"moment for '{name}' has shape {m.shape}, parameter {param.shape}")

        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)

        denom = np.sqrt(v / bc2) + state.epsilon
        param.data -= ((state.lr / bc1) * m / denom).astype(param.dtype, copy=False)

        if param.floor is not None:
            np.maximum(param.data, param.floor, out=param.data)

    logger.debug(f"Adam step {state.step} over {len(params)} parameter tensors")
    return state
