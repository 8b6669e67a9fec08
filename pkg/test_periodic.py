"""
Tests for periodic potentials: discriminant, band edges, Dirichlet data,
step-function xi and the gap-sum trace formula.
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from xitrace.errors import InterlacingError
from xitrace.periodic import (
    BandStructure,
    band_edges,
    dirichlet_mu,
    discriminant,
    floquet_multipliers,
    monodromy,
    xi_periodic,
)
from xitrace.potentials import mathieu, periodic, square_well, zero
from xitrace.schrodinger import green_diagonal_schrodinger, xi_schrodinger
from xitrace.trace import absolutely_continuous_set, reconstruct_V_periodic

TWO_PI = 2.0 * math.pi


def test_band_structure_validation():
    with pytest.raises(ValueError):
        BandStructure((0.0, 1.0, 2.0), 1.0)
    with pytest.raises(ValueError):
        BandStructure((0.0, 2.0, 1.0, 3.0), 1.0)
    bands = BandStructure((0.0, 1.0, 2.0, 3.0), 1.0)
    assert bands.bands == [(0.0, 1.0), (2.0, 3.0)]
    assert bands.gaps == [(1.0, 2.0)]
    assert bands.gap_lengths == [1.0]


def test_free_discriminant_and_monodromy():
    V = periodic(zero(), TWO_PI)
    assert discriminant(V, 1.0) == pytest.approx(2.0, abs=1e-9)
    assert discriminant(V, 0.25) == pytest.approx(-2.0, abs=1e-9)
    assert discriminant(V, 2.0) == pytest.approx(2.0 * math.cos(TWO_PI * math.sqrt(2.0)), abs=1e-9)
    M = monodromy(V, 0.7)
    assert np.isrealobj(M)
    assert np.linalg.det(M) == pytest.approx(1.0, abs=1e-10)


def test_free_band_edges_have_closed_gaps():
    V = periodic(zero(), TWO_PI)
    bands = band_edges(V, 3)
    np.testing.assert_allclose(bands.edges, [0.0, 0.25, 0.25, 1.0, 1.0, 2.25], atol=1e-9)
    assert all(g == 0.0 for g in bands.gap_lengths)


def test_mathieu_gaps_decrease():
    bands = band_edges(mathieu(2.0), 8)
    gaps = bands.gap_lengths
    assert len(gaps) == 7
    assert all(g > 0 for g in gaps)
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-4


def test_fourier_and_discriminant_edges_agree():
    V = mathieu(1.0)
    fourier = band_edges(V, 3, method="fourier")
    scanned = band_edges(V, 3, method="discriminant")
    np.testing.assert_allclose(fourier.edges, scanned.edges, atol=1e-7)
    with pytest.raises(ValueError):
        band_edges(V, 3, method="shooting")
    with pytest.raises(ValueError):
        band_edges(square_well(1.0, 1.0), 3)


def test_band_edges_are_discriminant_roots():
    V = mathieu(1.5)
    bands = band_edges(V, 4)
    assert discriminant(V, bands.edges[0]) == pytest.approx(2.0, abs=1e-6)
    assert abs(discriminant(V, bands.edges[1])) == pytest.approx(2.0, abs=1e-6)
    lo, hi = bands.bands[0]
    assert abs(discriminant(V, 0.5 * (lo + hi))) < 2.0


def test_floquet_multipliers_inside_and_outside_bands():
    V = mathieu(1.0)
    z = -2.0 + 1e-9j
    data = floquet_multipliers(V, z)
    small, large = data.multipliers
    assert abs(small) < 1.0 < abs(large)
    assert small * large == pytest.approx(1.0, abs=1e-8)


def test_periodic_green_function_is_herglotz():
    V = mathieu(1.0)
    for z in (0.3 + 0.5j, 2.0 + 0.1j):
        assert green_diagonal_schrodinger(V, 0.4, z).is_herglotz()


@pytest.mark.parametrize("x", [0.0, 1.0])
def test_boundary_phase_is_half_inside_mathieu_bands(x):
    V = mathieu(2.0)
    bands = band_edges(V, 3)
    for lo, hi in bands.bands:
        assert xi_schrodinger(V, x, 0.5 * (lo + hi)).value == pytest.approx(0.5, abs=0.02)


def test_dirichlet_mu_lie_in_gaps():
    V = mathieu(2.0)
    bands = band_edges(V, 5)
    mu = dirichlet_mu(V, 1.0, 4, bands)
    assert len(mu) == 4
    for n, value in enumerate(mu, start=1):
        lo, hi = bands.gaps[n - 1]
        assert lo - 1e-8 <= value <= hi + 1e-8
    assert dirichlet_mu(V, 1.0, 0, bands) == []


def test_xi_periodic_structure():
    bands = BandStructure((0.0, 1.0, 2.0, 3.0, 3.0, 5.0), 1.0)
    xi = xi_periodic(bands, [1.5, 3.0])
    assert xi(-1.0) == 0.0
    assert xi(0.5) == 0.5
    assert xi(1.2) == 1.0
    assert xi(1.8) == 0.0
    assert xi(4.0) == 0.5
    assert xi.coverage == (-math.inf, 5.0)
    # the closed gap at 3 leaves no feature
    assert not np.any(np.isclose(xi.jumps, 3.0))
    assert absolutely_continuous_set(xi) == [(0.0, 1.0), (2.0, 5.0)]


def test_xi_periodic_flags_energies_above_last_edge():
    bands = BandStructure((0.0, 1.0, 2.0, 3.0), 1.0)
    xi = xi_periodic(bands, [1.5])
    assert not xi.low_confidence(2.5)
    assert not xi.low_confidence(3.0)
    assert xi.low_confidence(3.5)
    np.testing.assert_array_equal(xi.low_confidence(np.array([-5.0, 1.2, 10.0])), [False, False, True])


def test_xi_periodic_rejects_mu_outside_gap():
    bands = BandStructure((0.0, 1.0, 2.0, 3.0), 1.0)
    with pytest.raises(InterlacingError):
        xi_periodic(bands, [2.5])
    with pytest.raises(ValueError):
        xi_periodic(bands, [])


def test_gap_sum_trace_formula_toy():
    edges = [0.0, 1.0, 2.0, 3.0, 4.0]
    assert reconstruct_V_periodic(edges, [1.5, 3.5]).value == pytest.approx(0.0)
    result = reconstruct_V_periodic(edges, [1.0, 3.0])
    assert result.value == pytest.approx(2.0)
    assert list(result.partial_sums) == pytest.approx([0.0, 1.0, 2.0])
    with pytest.raises(InterlacingError):
        reconstruct_V_periodic(edges, [2.5, 3.5])


def test_gap_sum_tail_bound_looks_past_a_closed_top_gap():
    edges = [0.0, 1.0, 2.0, 3.0, 5.0, 6.0, 6.0, 7.0]
    result = reconstruct_V_periodic(edges, [1.5, 4.0, 6.0], tol=0.0)
    assert result.tail_bound == pytest.approx(2.0)
    wide_first = [0.0, 1.0, 9.0, 10.0, 10.5, 11.0, 11.0, 12.0, 12.0, 13.0]
    result = reconstruct_V_periodic(wide_first, [5.0, 10.25, 11.0, 12.0], tol=0.0)
    assert result.tail_bound == pytest.approx(0.5)


def test_mathieu_trace_formula_recovers_potential():
    V = mathieu(2.0)
    x = 1.0
    bands = band_edges(V, 6)
    mu = dirichlet_mu(V, x, 5, bands)
    result = reconstruct_V_periodic(bands, mu, x)
    assert result.value == pytest.approx(float(V(x)), abs=1e-3)
    assert all(abs(t) <= g + 1e-8 for t, g in zip(result.terms, bands.gap_lengths))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
