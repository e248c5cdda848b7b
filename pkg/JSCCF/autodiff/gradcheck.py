"""
Gradient Check Module

Compares reverse-mode gradients against central finite differences.

Components:
- grad_check: check one scalar function at one input point
- GradCheckCase / OP_CASES: seeded samplers for every differentiable primitive
- run_gradcheck_suite: run each case over a number of seeded points and
  aggregate into one report per case

Checks run at 64-bit precision. The relative error of a component is
|a - n| / max(|a|, |n|, floor), where floor is a fraction of the largest
numerical gradient magnitude of the whole check.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from JSCCF.autodiff import functional as F
from JSCCF.autodiff.config.config import (
    GRADCHECK_DTYPE,
    GRADCHECK_KINK_MARGIN,
    GRADCHECK_POINTS,
    GRADCHECK_RELATIVE_FLOOR,
    GRADCHECK_STEP,
    GRADCHECK_TOLERANCE,
)
from JSCCF.autodiff.tensor import Tape, Tensor

logger = logging.getLogger("JSCCF.autodiff.gradcheck")


@dataclass
class GradCheckReport:
    """Outcome of one check (or of a case aggregated over several points)."""
    name: str
    passed: bool
    max_rel_error: float
    points: int = 1
    message: str = ""


def _evaluate(fn: Callable[..., Tensor], inputs: Sequence[Tensor]) -> float:
    return float(fn(*inputs).data)


def grad_check(
    fn: Callable[..., Tensor],
    inputs: Sequence[Tensor],
    tolerance: float = GRADCHECK_TOLERANCE,
    step: float = GRADCHECK_STEP,
    name: str = "op",
) -> GradCheckReport:
    """
    Check the gradient of a scalar-valued ``fn`` at ``inputs``.

    Args:
        fn: Function of the input tensors returning a scalar tensor
        inputs: Point of evaluation; tensors with ``requires_grad`` are checked
        tolerance: Maximum admissible relative error
        step: Central-difference step h
        name: Label for the report

    Returns:
        GradCheckReport with the maximum relative error over all components
    """
    checked = [t for t in inputs if t.requires_grad]
    for t in checked:
        t.zero_grad()

    with Tape() as tape:
        loss = fn(*inputs)
        if not np.all(np.isfinite(loss.data)):
            return GradCheckReport(name, False, float("inf"), message="non-finite loss at the check point")
        tape.backward(loss)
    analytic = [t.grad.copy() for t in checked]

    numeric = []
    for t in checked:
        estimate = np.zeros_like(t.data)
        flat, out = t.data.reshape(-1), estimate.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + step
            f_plus = _evaluate(fn, inputs)
            flat[i] = original - step
            f_minus = _evaluate(fn, inputs)
            flat[i] = original
            out[i] = (f_plus - f_minus) / (2 * step)
        numeric.append(estimate)

    for a, n in zip(analytic, numeric):
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(n))):
            return GradCheckReport(name, False, float("inf"), message="non-finite gradient values")

    if not checked:
        return GradCheckReport(name, True, 0.0, message="no inputs require a gradient")

    scale = max(float(np.max(np.abs(n))) for n in numeric)
    floor = max(GRADCHECK_RELATIVE_FLOOR * scale, 1e-12)
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))

    passed = worst < tolerance
    if not passed:
        logger.warning(f"Gradient check '{name}' failed: max relative error {worst:.3e}")
    return GradCheckReport(name, passed, worst)


# ---------------------------------------------------------------------------
# Seeded cases
# ---------------------------------------------------------------------------

Sampler = Callable[[np.random.Generator], Tuple[Callable[..., Tensor], List[Tensor]]]


@dataclass
class GradCheckCase:
    name: str
    sample: Sampler


def _leaf(rng: np.random.Generator, shape, low=-1.0, high=1.0) -> Tensor:
    return Tensor(rng.uniform(low, high, size=shape).astype(GRADCHECK_DTYPE), requires_grad=True)


def _away_from_kink(rng: np.random.Generator, shape) -> np.ndarray:
    values = rng.uniform(-1.0, 1.0, size=shape)
    close = np.abs(values) < GRADCHECK_KINK_MARGIN
    while np.any(close):
        values[close] = rng.uniform(-1.0, 1.0, size=int(close.sum()))
        close = np.abs(values) < GRADCHECK_KINK_MARGIN
    return values


def _reduce(out: Tensor, rng_weights: np.ndarray) -> Tensor:
    return F.weighted_sum(out, rng_weights)


def _conv_down_case(rng):
    x, k, b = _leaf(rng, (1, 4, 4, 2)), _leaf(rng, (3, 3, 2, 3)), _leaf(rng, (3,))
    w = rng.standard_normal((1, 2, 2, 3))
    return (lambda x, k, b: _reduce(F.conv2d_down(x, k, b, stride=2), w)), [x, k, b]


def _conv_up_case(rng):
    x, k, b = _leaf(rng, (1, 2, 2, 2)), _leaf(rng, (3, 3, 2, 3)), _leaf(rng, (3,))
    w = rng.standard_normal((1, 4, 4, 3))
    return (lambda x, k, b: _reduce(F.conv2d_up(x, k, b, stride=2), w)), [x, k, b]


def _gdn_case(inverse):
    def sample(rng):
        x = _leaf(rng, (1, 2, 2, 3), -0.5, 0.5)
        beta = _leaf(rng, (3,), 0.5, 1.5)
        gamma = _leaf(rng, (3, 3), 0.0, 0.3)
        w = rng.standard_normal((1, 2, 2, 3))
        return (lambda x, b, g: _reduce(F.gdn(x, b, g, inverse=inverse), w)), [x, beta, gamma]
    return sample


def _prelu_case(rng):
    x = Tensor(_away_from_kink(rng, (2, 3, 3)).astype(GRADCHECK_DTYPE), requires_grad=True)
    slope = _leaf(rng, (3,), 0.0, 0.5)
    w = rng.standard_normal((2, 3, 3))
    return (lambda x, a: _reduce(F.prelu(x, a), w)), [x, slope]


def _sigmoid_case(rng):
    x = _leaf(rng, (2, 5), -3.0, 3.0)
    w = rng.standard_normal((2, 5))
    return (lambda x: _reduce(F.sigmoid(x), w)), [x]


def _mse_case(rng):
    x, x_hat = _leaf(rng, (2, 6)), _leaf(rng, (2, 6))
    return (lambda a, b: F.mse_loss(a, b)), [x, x_hat]


def _sigmoid_mse_case(rng):
    target = Tensor(rng.uniform(0.0, 1.0, size=(2, 6)).astype(GRADCHECK_DTYPE))
    logits = _leaf(rng, (2, 6), -2.0, 2.0)
    return (lambda z, t: F.mse_loss(t, F.sigmoid(z))), [logits, target]


def _power_normalize_case(rng):
    x = _leaf(rng, (2, 6))
    h = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    w = rng.standard_normal((2, 6))
    return (lambda v: _reduce(F.complex_gain(F.power_normalize(v), h), w)), [x]


OP_CASES: List[GradCheckCase] = [
    GradCheckCase("conv2d_down", _conv_down_case),
    GradCheckCase("conv2d_up", _conv_up_case),
    GradCheckCase("gdn", _gdn_case(inverse=False)),
    GradCheckCase("igdn", _gdn_case(inverse=True)),
    GradCheckCase("prelu", _prelu_case),
    GradCheckCase("sigmoid", _sigmoid_case),
    GradCheckCase("mse_loss", _mse_case),
    GradCheckCase("sigmoid_mse", _sigmoid_mse_case),
    GradCheckCase("power_normalize", _power_normalize_case),
]


def run_case(
    case: GradCheckCase,
    points: int = GRADCHECK_POINTS,
    seed: int = 0,
    tolerance: float = GRADCHECK_TOLERANCE,
) -> GradCheckReport:
    """Run one case over ``points`` seeded points and keep the worst error."""
    worst = 0.0
    messages = []
    for point in range(points):
        rng = np.random.default_rng([seed, point])
        fn, inputs = case.sample(rng)
        report = grad_check(fn, inputs, tolerance=tolerance, name=case.name)
        worst = max(worst, report.max_rel_error)
        if not report.passed and report.message:
            messages.append(f"point {point}: {report.message}")
    passed = worst < tolerance
    logger.info(f"Gradient check {case.name}: max relative error {worst:.3e} over {points} points")
    return GradCheckReport(case.name, passed, worst, points=points, message="; ".join(messages))


def run_gradcheck_suite(
    extra_cases: Sequence[GradCheckCase] = (),
    points: int = GRADCHECK_POINTS,
    seed: int = 0,
    tolerance: float = GRADCHECK_TOLERANCE,
) -> List[GradCheckReport]:
    """Run every primitive case plus ``extra_cases`` (e.g. model composites)."""
    return [run_case(case, points, seed, tolerance) for case in [*OP_CASES, *extra_cases]]
