"""
Tests for the almost-Mathieu measure experiments and the even-potential
reconstruction.
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from xitrace.errors import EvennessError
from xitrace.experiments import (
    ac_bound_experiment,
    almost_mathieu_spectrum,
    borg_demo,
    continued_fraction_approximants,
    even_dirichlet_data,
    floquet_bands,
    floquet_matrix,
)
from xitrace.potentials import Potential, harmonic, quartic, square_well

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def test_floquet_matrix_is_hermitian():
    H = floquet_matrix([0.3, -0.2, 1.0], 0.7)
    np.testing.assert_allclose(H, H.conj().T)
    np.testing.assert_allclose(floquet_bands([0.0]), [(-2.0, 2.0)], atol=1e-12)


def test_free_spectrum_has_measure_four():
    spec = almost_mathieu_spectrum(0.0, 1, 2)
    assert spec.measure == pytest.approx(4.0, abs=1e-9)
    assert spec.bound == 4.0
    assert spec.to_dict()["q"] == 2


def test_half_frequency_spectrum_is_explicit():
    # Delta(E) = E^4 - 5E^2 + 2: spectrum [-sqrt5, -2] U [-1, 1] U [2, sqrt5]
    spec = almost_mathieu_spectrum(1.0, 1, 2)
    assert spec.measure == pytest.approx(2.0 + 2.0 * (math.sqrt(5.0) - 2.0), abs=1e-10)
    assert spec.measure >= spec.bound
    np.testing.assert_allclose(spec.spectrum[0], (-math.sqrt(5.0), -2.0), atol=1e-10)


def test_measure_bound_at_larger_coupling():
    spec = almost_mathieu_spectrum(1.5, 1, 3)
    assert spec.measure >= spec.bound - 1e-10


@pytest.mark.parametrize("coupling", [0.5, 1.0, 1.5])
def test_measure_bound_for_all_small_denominators(coupling):
    for q in range(1, 14):
        for p in range(1, 2 * q):
            if math.gcd(p, q) != 1:
                continue
            spec = almost_mathieu_spectrum(coupling, p, q)
            assert spec.measure >= 4.0 - 2.0 * coupling - 1e-6, f"alpha={p}/{q}"


@pytest.mark.parametrize("cell", [[0.0, 0.0], [0.3, -0.2, 1.0], [1.5, -0.4, 0.0, 0.8, -1.1],
                                  list(np.cos(np.pi * np.arange(10) / 5.0 + 0.3))])
def test_floquet_bands_match_dense_quasi_momentum_sweep(cell):
    sweep = np.array([np.linalg.eigvalsh(floquet_matrix(cell, k)) for k in np.linspace(-np.pi, np.pi, 2001)])
    bands = floquet_bands(cell)
    np.testing.assert_allclose([lo for lo, _ in bands], sweep.min(axis=0), atol=1e-8)
    np.testing.assert_allclose([hi for _, hi in bands], sweep.max(axis=0), atol=1e-8)


def test_almost_mathieu_symmetries():
    base = almost_mathieu_spectrum(1.2, 1, 3).measure
    assert almost_mathieu_spectrum(-1.2, 1, 3).measure == pytest.approx(base, abs=1e-10)
    # cos(pi (2 - alpha) n) = cos(pi alpha n)
    assert almost_mathieu_spectrum(1.2, 5, 3).measure == pytest.approx(base, abs=1e-10)
    with pytest.raises(ValueError):
        almost_mathieu_spectrum(1.0, 2, 4)


def test_continued_fraction_approximants():
    approximants = continued_fraction_approximants(GOLDEN, 6)
    assert approximants == [(1, 1), (1, 2), (2, 3), (3, 5), (5, 8), (8, 13)]
    for p, q in approximants[1:]:
        assert abs(GOLDEN - p / q) < 1.0 / q ** 2
    assert continued_fraction_approximants(0.5, 5) == [(0, 1), (1, 2)]
    with pytest.raises(ValueError):
        continued_fraction_approximants(GOLDEN, 0)


def test_ac_bound_experiment_table():
    report = ac_bound_experiment(1.0, GOLDEN, count=6)
    assert len(report.rows) == 6
    qs = [row["q"] for row in report.rows]
    assert qs == sorted(set(qs))
    for row in report.rows:
        assert row["measure_in_window"] <= row["measure"] + 1e-12
    assert report.limsup_estimate == max(row["measure_in_window"] for row in report.rows[3:])
    assert report.to_dict()["bound"] == 2.0


def test_ac_bound_experiment_validation():
    with pytest.raises(ValueError):
        ac_bound_experiment(1.0, GOLDEN, approximants=[(1, 3), (1, 2)])
    with pytest.raises(ValueError):
        ac_bound_experiment(1.0, GOLDEN, window=(1.0, -1.0))


def test_even_dirichlet_data():
    assert even_dirichlet_data([0.0, 2.0, 4.0, 6.0, 8.0]) == [2.0, 2.0, 6.0, 6.0]


def test_borg_demo_harmonic():
    report = borg_demo(harmonic(1.0, -1.0), 8, check_dirichlet=True)
    assert report.V0 == -1.0
    assert report.reconstructed == pytest.approx(-1.0, abs=1e-4)
    assert report.dirichlet_mismatch < 1e-6
    payload = report.to_dict()
    assert len(payload["eigenvalues"]) == 9
    assert payload["error"] == report.error


def test_borg_demo_quartic():
    report = borg_demo(quartic(), 16)
    assert report.error < 0.05


def test_borg_demo_validation():
    tilted = Potential("tilted", lambda x: x * x + 0.5 * x, -0.0625, confining=True)
    with pytest.raises(EvennessError):
        borg_demo(tilted, 4)
    with pytest.raises(ValueError):
        borg_demo(square_well(1.0, 1.0), 4)
    with pytest.raises(ValueError):
        borg_demo(harmonic(), 1)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
