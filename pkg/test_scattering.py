"""
Tests for scattering data: Jost solutions, reflection coefficients and xi
from the reflection coefficient.
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from xitrace.errors import ShortRangeError
from xitrace.potentials import gaussian, harmonic, poschl_teller, square_well, zero
from xitrace.scattering import (
    jost_solution,
    reflection_coefficient,
    scattering_radius,
    wronskian,
    xi_from_scattering,
    xi_scattering,
)
from xitrace.schrodinger import xi_schrodinger


def square_well_reflection(depth: float, half_width: float, energy: float) -> float:
    """|R| of a square well from the textbook transfer-matrix result."""
    q = math.sqrt(energy + depth)
    s = depth ** 2 * math.sin(2.0 * q * half_width) ** 2 / (4.0 * energy * (energy + depth))
    return math.sqrt(s / (1.0 + s))


def test_free_scattering():
    data = reflection_coefficient(zero(), 2.0)
    assert abs(data.R) < 1e-12
    assert data.T == pytest.approx(1.0)
    assert xi_from_scattering(data) == pytest.approx(0.5)


def test_jost_solution_free_asymptotics():
    lam = 4.0
    f, df = jost_solution(zero(), lam, "plus", 1.5)
    assert f == pytest.approx(complex(math.cos(3.0), math.sin(3.0)))
    assert df == pytest.approx(2j * f)
    f0 = jost_solution(zero(), lam, "plus", 0.0)
    g0 = jost_solution(zero(), lam, "minus", 0.0)
    assert wronskian(g0, f0) == pytest.approx(4j)
    with pytest.raises(ValueError):
        jost_solution(zero(), 0.0, "plus", 0.0)
    with pytest.raises(ValueError):
        jost_solution(zero(), 1.0, "left", 0.0)


@pytest.mark.parametrize("energy, expected", [(10.0, 0.01635), (100.0, 0.00472)])
def test_square_well_reflection_closed_form(energy, expected):
    data = reflection_coefficient(square_well(1.0, 2.0), energy)
    closed_form = square_well_reflection(1.0, 1.0, energy)
    assert abs(data.R) == pytest.approx(closed_form, rel=1e-6)
    assert abs(data.R) == pytest.approx(expected, abs=2e-5)
    assert abs(data.R_left) == pytest.approx(abs(data.R), rel=1e-8)
    assert data.unitarity_defect < 1e-8


def test_reflection_is_independent_of_base_point():
    V = square_well(2.0, 1.5)
    a = reflection_coefficient(V, 3.0, x=0.0)
    b = reflection_coefficient(V, 3.0, x=0.4)
    assert a.R == pytest.approx(b.R, abs=1e-8)
    assert a.T == pytest.approx(b.T, abs=1e-8)


def test_poschl_teller_is_reflectionless():
    V = poschl_teller(1.0)
    for lam in (0.5, 1.0, 4.0):
        data = reflection_coefficient(V, lam)
        assert abs(data.R) < 1e-6
        assert abs(data.T) == pytest.approx(1.0, abs=1e-6)
        assert xi_from_scattering(data) == pytest.approx(0.5, abs=1e-6)


def test_xi_bound_from_reflection():
    V = gaussian(1.5, 0.7)
    for lam in (0.5, 2.0, 8.0):
        data = reflection_coefficient(V, lam, x=0.3)
        xi = xi_from_scattering(data)
        assert abs(xi - 0.5) <= math.asin(min(abs(data.R), 1.0)) / math.pi + 1e-10


@pytest.mark.parametrize("depth, width, x", [(1.0, 2.0, 0.0), (3.0, 1.0, 0.7), (-2.0, 1.0, 0.2), (8.0, 0.5, 1.4)])
def test_reflection_bounds_on_dense_energy_grid(depth, width, x):
    V = square_well(depth, width)
    for lam in np.linspace(0.05, 25.0, 200):
        data = reflection_coefficient(V, lam, x=x)
        assert data.unitarity_defect < 1e-8
        assert abs(abs(data.R) ** 2 + abs(data.T) ** 2 - 1.0) < 1e-8
        assert abs(xi_from_scattering(data) - 0.5) <= abs(data.R) / 2.0 + 1e-8


@pytest.mark.parametrize("seed", range(20))
def test_reflection_bound_on_random_wells_and_barriers(seed):
    rng = np.random.default_rng(500 + seed)
    V = square_well(rng.uniform(-3.0, 3.0), rng.uniform(0.2, 3.0))
    for _ in range(10):
        data = reflection_coefficient(V, rng.uniform(0.05, 10.0), x=rng.uniform(-2.0, 2.0))
        xi = xi_from_scattering(data)
        assert abs(xi - 0.5) <= math.asin(min(abs(data.R), 1.0)) / math.pi + 1e-8
        assert data.unitarity_defect < 1e-8


def test_xi_scattering_matches_boundary_phase():
    V = square_well(1.0, 2.0)
    for lam, x in ((2.0, 0.0), (5.0, 0.6), (5.0, 3.0)):
        assert xi_scattering(V, x, lam) == pytest.approx(xi_schrodinger(V, x, lam).value, abs=1e-4)


def test_short_range_check():
    with pytest.raises(ShortRangeError):
        scattering_radius(harmonic())
    assert scattering_radius(square_well(1.0, 2.0)) == 1.0
    with pytest.raises(ShortRangeError):
        scattering_radius(gaussian(1.0, 1.0), cutoff=1.0)


def test_scattering_data_to_dict():
    data = reflection_coefficient(square_well(1.0, 2.0), 10.0)
    row = data.to_dict()
    assert row["lambda"] == 10.0
    assert row["k"] == pytest.approx(math.sqrt(10.0))
    assert row["R_abs"] == pytest.approx(abs(data.R))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
