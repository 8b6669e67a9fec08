"""
Tests for trace-formula reconstruction of V(x) from xi.
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from xitrace.errors import CoverageError
from xitrace.experiments import even_dirichlet_data
from xitrace.numerics import StepFunction
from xitrace.schrodinger import xi_confining
from xitrace.spectral import XiGrid
from xitrace.trace import (
    absolutely_continuous_set,
    reconstruct_V,
    reconstruct_V_from_eigenvalues,
    summability_profile,
)

# Harmonic oscillator x^2 - 1: E_n = 2n, V(0) = -1
HARMONIC_E = [2.0 * n for n in range(17)]
HARMONIC_MU = even_dirichlet_data(HARMONIC_E)


def bump_xi(upper: float = math.inf) -> XiGrid:
    """xi = 1 on [0, 1), 1/2 above: V = E0 - 1."""
    return XiGrid.piecewise(0.0, StepFunction([0.0, 1.0], [0.0, 1.0, 0.5]), coverage=(-math.inf, upper))


def test_harmonic_alternating_tail_is_exact():
    xi = xi_confining(None, 0.0, HARMONIC_E, HARMONIC_MU)
    result = reconstruct_V(xi, 0.0)
    assert result.tail == "alternating"
    assert result.value == pytest.approx(-1.0, abs=1e-9)
    assert result.exact_integral == pytest.approx(-1.0, abs=1e-9)
    assert result.pairs == 8
    assert not result.low_confidence
    assert result.abel.value == pytest.approx(-1.0, abs=1e-3)


def test_eigenvalue_sum_form():
    result = reconstruct_V_from_eigenvalues(HARMONIC_E, HARMONIC_MU)
    assert result.value == pytest.approx(-1.0, abs=1e-3)
    assert result.E0 == 0.0
    assert len(result.abel.integrals) == 5


def test_shifted_potential_shifts_reconstruction():
    shifted_E = [e + 3.0 for e in HARMONIC_E]
    shifted_mu = [m + 3.0 for m in HARMONIC_MU]
    xi = xi_confining(None, 0.0, shifted_E, shifted_mu)
    assert reconstruct_V(xi, 3.0).value == pytest.approx(2.0, abs=1e-9)


def test_zero_tail_for_xi_ending_on_a_band():
    result = reconstruct_V(bump_xi(upper=10.0), 0.0)
    assert result.tail == "zero"
    assert result.value == pytest.approx(-1.0, abs=1e-12)
    assert result.abel.value == pytest.approx(-1.0, abs=1e-4)
    assert not result.low_confidence


def test_full_coverage_uses_abel_schedule():
    result = reconstruct_V(bump_xi(), 0.0)
    assert result.tail == "none"
    assert result.value == pytest.approx(-1.0, abs=1e-12)
    assert result.abel.value == pytest.approx(-1.0, abs=1e-4)


def test_lower_limit_below_spectrum():
    # extending E0 below inf spec adds a region with integrand 1 and xi = 0
    result = reconstruct_V(bump_xi(), -2.0)
    assert result.value == pytest.approx(-1.0, abs=1e-12)


def test_grid_xi_with_half_tail():
    lambdas = np.linspace(0.0, 10.0, 101)
    xi = XiGrid.grid(0.0, lambdas, np.full(lambdas.size, 0.5))
    result = reconstruct_V(xi, 0.0)
    assert result.tail == "zero"
    assert result.value == pytest.approx(0.0, abs=1e-12)


def test_grid_xi_low_confidence_follows_flags_and_coverage():
    lambdas = np.linspace(0.0, 4.0, 5)
    flags = [True, True, False, True, True]
    xi = XiGrid.grid(0.0, lambdas, np.full(lambdas.size, 0.5), flags)
    assert not xi.low_confidence(0.5)
    assert xi.low_confidence(1.5)
    assert xi.low_confidence(2.5)
    assert not xi.low_confidence(3.5)
    assert xi.low_confidence(4.5)


def test_coverage_errors():
    lambdas = np.linspace(0.0, 10.0, 11)
    not_half = XiGrid.grid(0.0, lambdas, np.full(lambdas.size, 0.9))
    with pytest.raises(CoverageError):
        reconstruct_V(not_half, 0.0)
    starts_late = XiGrid.grid(0.0, lambdas + 1.0, np.full(lambdas.size, 0.5))
    with pytest.raises(CoverageError):
        reconstruct_V(starts_late, 0.0)
    with pytest.raises(CoverageError):
        reconstruct_V(bump_xi(upper=10.0), 0.0, tail="none")
    with pytest.raises(ValueError):
        reconstruct_V(bump_xi(), 0.0, tail="geometric")


def test_summability_profile():
    profile = summability_profile(bump_xi(), 0.0)
    assert np.all(np.diff(profile.cumulative) >= 0)
    assert profile.cumulative[-1] == pytest.approx(0.5)
    assert profile.plateau

    oscillating = xi_confining(None, 0.0, HARMONIC_E, HARMONIC_MU)
    assert not summability_profile(oscillating, 0.0).plateau
    records = summability_profile(oscillating, 0.0).to_records()
    assert records[0] == {"lambda": 0.0, "cumulative": 0.0}


def test_absolutely_continuous_set():
    xi = XiGrid.grid(0.0, [0.0, 1.0, 2.0, 3.0, 4.0], [0.0, 0.5, 0.5, 1.0, 0.5])
    assert absolutely_continuous_set(xi) == [(1.0, 2.0)]
    confining = xi_confining(None, 0.0, HARMONIC_E, HARMONIC_MU)
    assert absolutely_continuous_set(confining) == []


def test_trace_result_to_dict():
    result = reconstruct_V(bump_xi(upper=10.0), 0.0)
    payload = result.to_dict()
    assert payload["tail"] == "zero"
    assert payload["coverage"] == [-math.inf, 10.0]
    assert len(payload["abel"]["alphas"]) == 5


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
