"""PSNR on the 0-255 scale and empirical distribution helpers."""

import logging
from typing import Sequence, Tuple

import numpy as np

from JSCCF.errors import ShapeError
from JSCCF.evaluation.config.config import PSNR_MAX

logger = logging.getLogger("JSCCF.evaluation.metrics")


def psnr(x, x_hat, max_value: float = PSNR_MAX) -> float:
    """
    10 log10(MAX^2 / MSE) with MSE the per-element mean squared error.

    Both inputs are on the 0-255 scale (no rounding). A perfect
    reconstruction returns +inf.
    """
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ShapeError(f"psnr shape mismatch: {x.shape} vs {x_hat.shape}")
    mse = float(np.mean((x - x_hat) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(max_value ** 2 / mse))


def psnr_per_image(x, x_hat) -> np.ndarray:
    """PSNR of each image of two N x ... batches in [0, 1]."""
    x = np.asarray(x, dtype=np.float64) * PSNR_MAX
    x_hat = np.asarray(x_hat, dtype=np.float64) * PSNR_MAX
    if x.shape != x_hat.shape:
        raise ShapeError(f"psnr shape mismatch: {x.shape} vs {x_hat.shape}")
    mse = np.mean((x - x_hat).reshape(len(x), -1) ** 2, axis=1)
    with np.errstate(divide="ignore"):
        return np.where(mse == 0.0, np.inf, 10.0 * np.log10(PSNR_MAX ** 2 / np.where(mse == 0.0, 1.0, mse)))


def finite_mean(values: Sequence[float], what: str = "PSNR") -> float:
    """Arithmetic mean that skips +inf entries (logged)."""
    values = np.asarray(values, dtype=np.float64)
    finite = values[np.isfinite(values)]
    skipped = len(values) - len(finite)
    if skipped:
        logger.warning(f"Excluded {skipped} infinite {what} values (perfect reconstructions) from the mean")
    if len(finite) == 0:
        return float("inf") if len(values) else float("nan")
    return float(np.mean(finite))


def empirical_cdf(values: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Sorted values and cumulative probabilities i/N, i = 1..N."""
    ordered = np.sort(np.asarray(values, dtype=np.float64), kind="stable")
    return ordered, np.arange(1, len(ordered) + 1) / max(len(ordered), 1)
