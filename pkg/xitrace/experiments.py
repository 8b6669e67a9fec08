"""
Computed-evidence experiments.

Almost-Mathieu spectra at rational frequency and the measure bound
|spec| >= 4 - 2|lambda| along continued-fraction approximants, and the
even-potential demonstration that xi(0, .) and V(0) follow from the
eigenvalues alone.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from xitrace.errors import EvennessError
from xitrace.jacobi import JacobiOperator
from xitrace.potentials import Potential
from xitrace.schrodinger import WholeLine, dirichlet_eigenvalues, half_line_dirichlet_eigenvalues, xi_confining
from xitrace.spectral import XiGrid
from xitrace.trace import TraceResult, reconstruct_V

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Almost-Mathieu operator
# ---------------------------------------------------------------------------

def _merge_intervals(intervals: Sequence[Tuple[float, float]]) -> List[Tuple[float, float]]:
    merged: List[Tuple[float, float]] = []
    for lo, hi in sorted(intervals):
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((float(lo), float(hi)))
    return merged


def _measure(intervals: Sequence[Tuple[float, float]]) -> float:
    return float(sum(hi - lo for lo, hi in intervals))


def _intersect(intervals: Sequence[Tuple[float, float]], window: Tuple[float, float]) -> List[Tuple[float, float]]:
    a, b = window
    return [(max(lo, a), min(hi, b)) for lo, hi in intervals if min(hi, b) > max(lo, a)]


@dataclass(frozen=True)
class AlmostMathieuSpectrum:
    """Spectrum of v(n) = coupling cos(pi p n / q + theta) as a union of Floquet bands."""

    coupling: float
    p: int
    q: int
    theta: float
    bands: Tuple[Tuple[float, float], ...]
    spectrum: Tuple[Tuple[float, float], ...]
    measure: float

    @property
    def bound(self) -> float:
        return 4.0 - 2.0 * abs(self.coupling)

    def measure_in(self, window: Tuple[float, float]) -> float:
        return _measure(_intersect(self.spectrum, window))

    def to_dict(self) -> dict:
        return {
            "coupling": self.coupling,
            "p": self.p,
            "q": self.q,
            "theta": self.theta,
            "measure": self.measure,
            "bound": self.bound,
            "bands": [list(b) for b in self.bands],
        }


def floquet_matrix(cell: Sequence[float], k: float) -> np.ndarray:
    """P x P Bloch matrix of a period-P Jacobi operator at quasi-momentum k."""
    P = len(cell)
    H = np.diag(np.asarray(cell, dtype=complex))
    for n in range(P - 1):
        H[n, n + 1] += 1.0
        H[n + 1, n] += 1.0
    H[P - 1, 0] += np.exp(1j * k)
    H[0, P - 1] += np.exp(-1j * k)
    return H


def floquet_bands(cell: Sequence[float]) -> List[Tuple[float, float]]:
    """
    Band j spans the j-th eigenvalues at k = 0 and k = pi.

    Each band function is monotone in k on [0, pi] and even in k, so the
    periodic and antiperiodic points are its extremes.
    """
    periodic = np.linalg.eigvalsh(floquet_matrix(cell, 0.0))
    anti = np.linalg.eigvalsh(floquet_matrix(cell, math.pi))
    return [(float(min(a, b)), float(max(a, b))) for a, b in zip(periodic, anti)]


def almost_mathieu_spectrum(coupling: float, p: int, q: int, theta: float = 0.0) -> AlmostMathieuSpectrum:
    """
    Floquet bands and spectral measure for frequency alpha = p/q.

    Raises:
        ValueError: If q < 1 or gcd(p, q) != 1
    """
    h = JacobiOperator.almost_mathieu(coupling, p, q, theta)
    bands = floquet_bands(h.cell)
    spectrum = _merge_intervals(bands)
    result = AlmostMathieuSpectrum(float(coupling), int(p), int(q), float(theta), tuple(bands),
                                   tuple(spectrum), _measure(spectrum))
    logger.debug(f"Almost-Mathieu coupling={coupling} alpha={p}/{q}: measure {result.measure:.10g}")
    return result


def continued_fraction_approximants(alpha: float, count: int) -> List[Tuple[int, int]]:
    """
    Convergents p_k/q_k of alpha with strictly increasing q_k.

    Stops early when alpha is rational and the expansion terminates.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    h_prev, h = 0, 1
    k_prev, k = 1, 0
    x = float(alpha)
    result: List[Tuple[int, int]] = []
    for _ in range(4 * count + 4):
        a = math.floor(x)
        h_prev, h = h, a * h + h_prev
        k_prev, k = k, a * k + k_prev
        if result and k == result[-1][1]:
            result[-1] = (h, k)
        else:
            result.append((h, k))
        frac = x - a
        if len(result) >= count or frac < 1e-12:
            break
        x = 1.0 / frac
    return result[:count]


@dataclass
class ACBoundReport:
    """Measures of |S intersect spec(h_{p_k/q_k})| along the approximants."""

    coupling: float
    alpha_target: float
    window: Tuple[float, float]
    rows: List[Dict[str, float]] = field(default_factory=list)
    limsup_estimate: float = 0.0

    @property
    def bound(self) -> float:
        return 4.0 - 2.0 * abs(self.coupling)

    def to_dict(self) -> dict:
        return {
            "coupling": self.coupling,
            "alpha_target": self.alpha_target,
            "window": list(self.window),
            "bound": self.bound,
            "limsup_estimate": self.limsup_estimate,
            "rows": self.rows,
        }


def ac_bound_experiment(coupling: float, alpha_target: float,
                        approximants: Optional[Sequence[Tuple[int, int]]] = None,
                        window: Tuple[float, float] = (-4.0, 4.0), count: int = 8) -> ACBoundReport:
    """
    Table of |S intersect spec(h_{p_k/q_k})| against k.

    The limsup over k bounds the absolutely continuous spectrum of the
    operator at alpha_target from below; it is estimated as the largest
    value over the second half of the table.
    """
    if window[1] <= window[0]:
        raise ValueError(f"Window must satisfy lo < hi, got {window}")
    approximants = list(approximants) if approximants is not None else \
        continued_fraction_approximants(alpha_target, count)
    qs = [q for _, q in approximants]
    if any(b <= a for a, b in zip(qs, qs[1:])):
        raise ValueError(f"Approximant denominators must increase: {qs}")

    report = ACBoundReport(float(coupling), float(alpha_target), (float(window[0]), float(window[1])))
    for index, (p, q) in enumerate(approximants):
        spec = almost_mathieu_spectrum(coupling, p, q)
        report.rows.append({
            "k": index,
            "p": p,
            "q": q,
            "alpha": p / q,
            "measure": spec.measure,
            "measure_in_window": spec.measure_in(window),
        })
    tail = report.rows[len(report.rows) // 2:]
    report.limsup_estimate = max(r["measure_in_window"] for r in tail) if tail else 0.0
    logger.info(f"AC bound experiment: limsup estimate {report.limsup_estimate:.6f}, "
                f"bound {report.bound:.6f}")
    return report


# ---------------------------------------------------------------------------
# Even potentials
# ---------------------------------------------------------------------------

@dataclass
class BorgReport:
    """xi(0, .) and V(0) built from the eigenvalues of an even confining potential."""

    potential: dict
    eigenvalues: List[float]
    dirichlet: List[float]
    xi: XiGrid
    trace: TraceResult
    V0: float
    dirichlet_mismatch: Optional[float] = None

    @property
    def reconstructed(self) -> float:
        return self.trace.value

    @property
    def error(self) -> float:
        return abs(self.trace.value - self.V0)

    def to_dict(self) -> dict:
        return {
            "potential": self.potential,
            "eigenvalues": self.eigenvalues,
            "dirichlet": self.dirichlet,
            "xi": self.xi.to_records(),
            "reconstructed_V0": self.reconstructed,
            "V0": self.V0,
            "error": self.error,
            "dirichlet_mismatch": self.dirichlet_mismatch,
            "trace": self.trace.to_dict(),
        }


def even_dirichlet_data(E: Sequence[float]) -> List[float]:
    """mu_n(0) = E_{2 ceil(n/2) - 1}: each odd-indexed eigenvalue twice."""
    mu = []
    for n in range(1, len(E)):
        mu.append(float(E[2 * ((n + 1) // 2) - 1]))
    return mu


def borg_demo(V: Potential, n_max: int, check_dirichlet: bool = False) -> BorgReport:
    """
    Reconstruct V(0) of an even confining potential from E_0..E_{n_max}.

    Odd eigenfunctions vanish at 0, so the Dirichlet spectrum at 0 is the
    odd-indexed E_n, each twice; xi(0, .) jumps by +1 at every E_n and
    by -2 at odd-indexed ones.

    Raises:
        EvennessError: If V(x) != V(-x) on the sampled range
    """
    if not V.confining:
        raise ValueError(f"Potential '{V.name}' is not confining")
    if not V.is_even():
        raise EvennessError(f"Potential '{V.name}' is not even")
    if n_max < 2:
        raise ValueError(f"n_max must be >= 2, got {n_max}")

    logger.info(f"Computing {n_max + 1} eigenvalues of '{V.name}'...")
    E = dirichlet_eigenvalues(V, WholeLine(), n_max + 1)
    mu = even_dirichlet_data(E)
    xi = xi_confining(V, 0.0, E, mu)
    trace = reconstruct_V(xi, E[0])
    report = BorgReport(V.describe(), list(E), mu, xi, trace, float(V(0.0)))

    if check_dirichlet:
        shot = half_line_dirichlet_eigenvalues(V, 0.0, len(mu))
        report.dirichlet_mismatch = float(np.max(np.abs(np.asarray(shot) - np.asarray(mu))))
        logger.info(f"Half-line Dirichlet check: max mismatch {report.dirichlet_mismatch:.2e}")
    logger.info(f"Borg demo: V(0) = {report.V0:.8g}, reconstructed {report.reconstructed:.8g}")
    return report
