"""
Tests for the numerical kernels: ODE propagation, root finding, step
functions and Abelian extrapolation.
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from xitrace.errors import BracketError, UnsortedJumpsError
from xitrace.numerics import (
    AbelSchedule,
    AlternatingTail,
    CallableFunction,
    GridFunction,
    RealInterval,
    StepFunction,
    abel_limit,
    find_root_bracketed,
    fundamental_matrix,
    integrate_log_derivative,
    integrate_ode,
    integrate_piecewise_constant,
    prufer_angle,
    richardson_limit,
)


def test_real_interval_rejects_bad_bounds():
    with pytest.raises(ValueError):
        RealInterval(1.0, 1.0)
    with pytest.raises(ValueError):
        RealInterval(0.0, math.inf)
    iv = RealInterval(-1.0, 2.0)
    assert iv.width == 3.0
    assert iv.contains(2.0) and not iv.contains(2.5)


def test_abel_schedule_validation():
    with pytest.raises(ValueError):
        AbelSchedule((0.1, 0.05), 10.0)
    with pytest.raises(ValueError):
        AbelSchedule((0.1, 0.1, 0.05), 10.0)
    with pytest.raises(ValueError):
        AbelSchedule((0.1, -0.05, -0.1), 10.0)
    # negative cutoffs are fine for potentials bounded below by a negative number
    assert AbelSchedule((0.3, 0.2, 0.1), -5.0).cutoff == -5.0


def test_abel_schedule_defaults():
    schedule = AbelSchedule.default(-2.0)
    alpha_min = min(schedule.alphas)
    assert math.exp(-alpha_min * (schedule.cutoff + 2.0)) == pytest.approx(1e-8, rel=1e-9)

    covered = AbelSchedule.for_coverage(1.0, 11.0)
    assert covered.cutoff == 11.0
    assert covered.alphas[0] == pytest.approx(0.04)
    with pytest.raises(ValueError):
        AbelSchedule.for_coverage(1.0, 1.0)


def test_integrate_ode_oscillatory():
    traj = integrate_ode(lambda x: -1.0, (0.0, 1.0), RealInterval(0.0, math.pi / 2))
    assert abs(traj.end_value - 1.0) < 1e-8
    assert abs(traj.end_derivative) < 1e-8


def test_integrate_ode_rescales_growing_solution():
    traj = integrate_ode(lambda x: 1.0, (1.0, 1.0), RealInterval(0.0, 300.0))
    assert np.max(traj.log_scale) > 0
    assert abs(traj.end_log_derivative - 1.0) < 1e-8
    assert math.log(abs(traj.end_value)) == pytest.approx(300.0, rel=1e-8)


def test_integrate_ode_gaussian_decay():
    # u = exp(-x^2 / 2) solves u'' = (x^2 - 1) u
    traj = integrate_ode(lambda x: x * x - 1.0, (1.0, 0.0), RealInterval(0.0, 2.0))
    assert traj.end_value == pytest.approx(math.exp(-2.0), rel=1e-7)
    assert traj.end_derivative == pytest.approx(-2.0 * math.exp(-2.0), rel=1e-7)


@pytest.mark.parametrize("length", [1.0, 5.0, 10.0, 20.0])
def test_integrate_ode_cosh_and_sinh(length):
    span = RealInterval(0.0, length)
    even = integrate_ode(lambda x: 1.0, (1.0, 0.0), span)
    odd = integrate_ode(lambda x: 1.0, (0.0, 1.0), span)
    assert even.end_value == pytest.approx(math.cosh(length), rel=1e-7)
    assert even.end_derivative == pytest.approx(math.sinh(length), rel=1e-7)
    assert odd.end_value == pytest.approx(math.sinh(length), rel=1e-7)
    assert odd.end_derivative == pytest.approx(math.cosh(length), rel=1e-7)
    M = fundamental_matrix(lambda x: 1.0, span)
    expected = [[math.cosh(length), math.sinh(length)], [math.sinh(length), math.cosh(length)]]
    np.testing.assert_allclose(M.real, expected, rtol=1e-7)


def test_integrate_ode_backward():
    traj = integrate_ode(lambda x: -1.0, (0.0, -1.0), RealInterval(0.0, math.pi), backward=True)
    # u(pi) = 0, u'(pi) = -1 is sin(x); at 0 the derivative is +1
    assert abs(traj.end_value) < 1e-8
    assert abs(traj.end_derivative - 1.0) < 1e-8


def test_fundamental_matrix_free_half_turn():
    M = fundamental_matrix(lambda x: -1.0, RealInterval(0.0, math.pi))
    np.testing.assert_allclose(M, [[-1.0, 0.0], [0.0, -1.0]], atol=1e-9)
    assert abs(np.linalg.det(M) - 1.0) < 1e-9


def test_fundamental_matrix_with_breakpoint():
    coefficient = lambda x: -1.0 if x < 1.0 else -4.0
    M = fundamental_matrix(coefficient, RealInterval(0.0, 2.0), breakpoints=(1.0,))
    assert abs(np.linalg.det(M) - 1.0) < 1e-9


def test_riccati_log_derivative():
    # u = cosh(x - x0) has u'/u = tanh(x - x0)
    w = integrate_log_derivative(lambda x: 1.0, 0.0, RealInterval(0.0, 2.0))
    assert w == pytest.approx(math.tanh(2.0), abs=1e-8)
    w = integrate_log_derivative(lambda x: 1.0, 0.0, RealInterval(0.0, 2.0), backward=True)
    assert w == pytest.approx(math.tanh(-2.0), abs=1e-8)


def test_prufer_angle_counts_zeros():
    theta = prufer_angle(lambda x: 0.0, 4.0, 0.0, math.pi, scale=2.0)
    assert theta == pytest.approx(2.0 * math.pi, abs=1e-8)


@pytest.mark.parametrize("method", ["DOP853", "LSODA"])
def test_prufer_angle_in_deep_forbidden_region(method):
    # V - E = 400 from a zero: u = sinh(20 x), tan(theta) = tanh(20 x) / 20
    theta = prufer_angle(lambda x: 400.0, 0.0, 0.0, 2.0, scale=1.0, method=method)
    assert theta == pytest.approx(math.atan(0.05), abs=1e-8)


def test_find_root_bracketed():
    root = find_root_bracketed(math.cos, RealInterval(0.0, 2.0))
    assert root == pytest.approx(math.pi / 2, abs=1e-12)
    with pytest.raises(BracketError):
        find_root_bracketed(lambda x: x * x + 1.0, RealInterval(0.0, 1.0))


def test_step_function_evaluation_is_right_continuous():
    f = StepFunction([0.0, 1.0], [0.0, 1.0, 0.0])
    assert f(0.0) == 1.0
    assert f(-1e-9) == 0.0
    assert f(1.0) == 0.0
    np.testing.assert_array_equal(f(np.array([-1.0, 0.5, 2.0])), [0.0, 1.0, 0.0])


def test_step_function_merges_and_drops_jumps():
    f = StepFunction([1.0, 1.0 + 1e-9, 2.0, 3.0], [0.0, 2.0, 1.0, 0.0, 0.0], merge_tol=1e-8)
    np.testing.assert_array_equal(f.jumps, [1.0, 2.0])
    np.testing.assert_array_equal(f.values, [0.0, 1.0, 0.0])


def test_step_function_rejects_unsorted_jumps():
    with pytest.raises(UnsortedJumpsError):
        StepFunction([1.0, 0.0], [0.0, 1.0, 0.0])
    with pytest.raises(ValueError):
        StepFunction([0.0], [0.0])


def test_step_function_integrals():
    f = StepFunction([0.0, 2.0], [0.0, 1.0, 0.0])
    assert f.integrate(-5.0, 5.0) == 2.0
    assert f.integrate(5.0, -5.0) == -2.0
    assert f.integrate(1.0, math.inf) == 1.0
    assert integrate_piecewise_constant([0.0, 2.0], [0.0, 1.0, 0.0], RealInterval(-1.0, 1.0)) == 1.0
    assert StepFunction([0.0], [0.0, 1.0]).integrate(0.0, math.inf) == math.inf


def test_step_function_laplace_is_exact():
    f = StepFunction([0.0], [0.0, 1.0])
    assert f.laplace(0.5, 0.0) == pytest.approx(2.0, rel=1e-14)
    g = StepFunction([1.0, 3.0], [0.0, 1.0, 0.0])
    expected = (math.exp(-0.25) - math.exp(-0.75)) / 0.25
    assert g.laplace(0.25, 0.0) == pytest.approx(expected, rel=1e-14)
    assert g.laplace(0.25, 0.0, upper=2.0) == pytest.approx((math.exp(-0.25) - math.exp(-0.5)) / 0.25)


def test_step_function_plateaus_and_affine():
    f = StepFunction([0.0, 1.0, 3.0], [0.0, 1.0, 0.0, 1.0])
    assert f.plateaus(0.0, 3.0) == [(0.0, 1.0, 1.0), (1.0, 3.0, 0.0)]
    g = f.affine(-2.0, 1.0)
    np.testing.assert_array_equal(g.values, [1.0, -1.0, 1.0, -1.0])
    np.testing.assert_array_equal(f.shifted(1.0).jumps, [1.0, 2.0, 4.0])
    np.testing.assert_array_equal(g.absolute().values, [1.0])


def test_grid_and_callable_functions():
    g = GridFunction([0.0, 1.0, 2.0], [0.0, 1.0, 0.0])
    assert g.integrate(-1.0, 3.0) == pytest.approx(1.0)
    assert g(0.5) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        GridFunction([0.0, 0.0], [1.0, 1.0])
    c = CallableFunction(lambda lam: math.exp(-lam))
    assert c.laplace(1.0, 0.0) == pytest.approx(0.5, rel=1e-9)


def test_alternating_tail():
    tail = AlternatingTail(start=10.0, first_value=-1.0, half_period=2.0)
    assert tail.laplace(0.0, 0.0) == -1.0
    assert tail.laplace(1e-6, 10.0) == pytest.approx(-1.0, rel=1e-6)
    fitted = AlternatingTail.from_plateaus([2.0, 2.0, 2.0, 2.0], 8.0, 1.0)
    assert fitted.half_period == pytest.approx(2.0)
    with pytest.raises(ValueError):
        AlternatingTail.from_plateaus([], 0.0, 1.0)


def test_richardson_limit_recovers_quadratic():
    alphas = [0.3, 0.2, 0.1]
    values = [3.0 + 2.0 * a + 5.0 * a * a for a in alphas]
    assert richardson_limit(alphas, values) == pytest.approx(3.0, abs=1e-12)


def test_abel_limit_step_integrand():
    f = StepFunction([0.0, 2.0], [0.0, -1.0, 0.0])
    result = abel_limit(f, 0.0)
    assert result.value == pytest.approx(-2.0, abs=1e-4)
    assert len(result.integrals) == len(result.alphas)
    assert len(result.estimates) == len(result.alphas) - 2
    assert result.converged


def test_abel_limit_is_linear():
    f = StepFunction([0.0, 2.0], [0.0, -1.0, 0.0])
    g = StepFunction([0.0, 1.0, 3.0], [0.0, 1.0, -1.0, 0.0])
    combined = StepFunction([0.0, 1.0, 2.0, 3.0], [0.0, -5.0, 1.0, 3.0, 0.0])
    schedule = AbelSchedule((0.4, 0.2, 0.1, 0.05), 10.0)
    value = abel_limit(combined, 0.0, schedule).value
    expected = 2.0 * abel_limit(f, 0.0, schedule).value - 3.0 * abel_limit(g, 0.0, schedule).value
    assert value == pytest.approx(expected, abs=1e-10)
    scaled = abel_limit(f.affine(-4.0, 0.0), 0.0, schedule).value
    assert scaled == pytest.approx(-4.0 * abel_limit(f, 0.0, schedule).value, abs=1e-10)


def test_abel_limit_with_alternating_tail():
    # -1, +1, -1, ... with half period 1 from 0: Abel sum -1/2
    f = StepFunction([0.0, 1.0, 2.0, 3.0, 4.0], [0.0, -1.0, 1.0, -1.0, 1.0, 0.0])
    tail = AlternatingTail(start=4.0, first_value=-1.0, half_period=1.0)
    result = abel_limit(f, 0.0, AbelSchedule((0.2, 0.1, 0.05, 0.025, 0.0125), 4.0), tail)
    assert result.value == pytest.approx(-0.5, abs=1e-4)
    assert result.to_dict()["alphas"] == list(result.alphas)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
