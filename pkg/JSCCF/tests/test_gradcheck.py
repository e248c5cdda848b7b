"""
Tests for the gradient checker (gradcheck.py, model/gradcheck_cases.py)
"""

import numpy as np
import pytest

from JSCCF.autodiff import functional as F
from JSCCF.autodiff.gradcheck import OP_CASES, GradCheckCase, grad_check, run_case, run_gradcheck_suite
from JSCCF.autodiff.tensor import Tensor
from JSCCF.model.gradcheck_cases import COMPOSITE_CASES


# Test grad_check
def test_linear_function_is_exact():
    x = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
    report = grad_check(lambda v: F.weighted_sum(v, np.array([0.5, 2.0, -1.0])), [x], name="linear")
    assert report.passed
    assert report.max_rel_error < 1e-8


def test_non_finite_loss_fails():
    x = Tensor(np.array([1.0]), requires_grad=True)
    report = grad_check(lambda v: F.add_constant(F.weighted_sum(v, np.ones(1)), np.array(np.inf)), [x], name="inf")
    assert not report.passed
    assert "non-finite" in report.message


def test_wrong_gradient_is_detected():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)

    def leaky(v):
        # the squared term bypasses the tape, so only the linear part is differentiated
        hidden = Tensor(v.data ** 2)
        return F.add(F.weighted_sum(v, np.ones(2)), F.weighted_sum(hidden, np.ones(2)))

    report = grad_check(leaky, [x], name="leaky")
    assert not report.passed
    assert report.max_rel_error > 0.5


# Test suites
@pytest.mark.parametrize("case", OP_CASES, ids=lambda c: c.name)
def test_primitive_cases_pass(case: GradCheckCase):
    report = run_case(case, points=20, seed=0)
    assert report.passed, report.message or f"max error {report.max_rel_error:.3e}"
    assert report.points == 20


@pytest.mark.parametrize("case", COMPOSITE_CASES, ids=lambda c: c.name)
def test_composite_cases_pass_quick(case: GradCheckCase):
    report = run_case(case, points=2, seed=1)
    assert report.passed, report.message or f"max error {report.max_rel_error:.3e}"


@pytest.mark.slow
def test_full_suite_passes():
    reports = run_gradcheck_suite(extra_cases=COMPOSITE_CASES, points=20, seed=0)
    assert [r.name for r in reports] == [c.name for c in [*OP_CASES, *COMPOSITE_CASES]]
    assert all(r.passed for r in reports)


def test_suite_is_seeded():
    first = run_case(OP_CASES[0], points=3, seed=7)
    second = run_case(OP_CASES[0], points=3, seed=7)
    assert first.max_rel_error == second.max_rel_error
