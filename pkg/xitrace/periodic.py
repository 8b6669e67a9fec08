"""
Periodic potentials: monodromy and Hill discriminant, band edges, Floquet
solutions, Dirichlet eigenvalues mu_n(x) on [x, x + L] and the step-function
xi of a periodic operator.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigvalsh, toeplitz
from scipy.optimize import minimize_scalar

from xitrace.config import (
    CLOSED_GAP_TOL,
    DISCRIMINANT_POINTS_PER_BAND,
    FOURIER_MIN_MODES,
    INTERLACING_TOL,
    ROOT_TOL,
)
from xitrace.errors import BracketError, InterlacingError
from xitrace.numerics import RealInterval, StepFunction, find_root_bracketed, fundamental_matrix
from xitrace.potentials import Potential
from xitrace.spectral import XiGrid

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BandStructure:
    """
    Band edges E_0 < E_1 <= E_2 < E_3 <= ... of a periodic operator.

    Bands are [E_{2k}, E_{2k+1}], gaps (E_{2n-1}, E_{2n}) for n >= 1.
    """

    edges: Tuple[float, ...]
    period: float

    def __post_init__(self):
        edges = tuple(float(e) for e in self.edges)
        if len(edges) < 2 or len(edges) % 2:
            raise ValueError(f"Band structure needs an even number (>= 2) of edges, got {len(edges)}")
        if any(b < a for a, b in zip(edges, edges[1:])):
            raise ValueError(f"Band edges must be sorted: {edges}")
        object.__setattr__(self, "edges", edges)

    @property
    def n_bands(self) -> int:
        return len(self.edges) // 2

    @property
    def bands(self) -> List[Tuple[float, float]]:
        e = self.edges
        return [(e[2 * k], e[2 * k + 1]) for k in range(self.n_bands)]

    @property
    def gaps(self) -> List[Tuple[float, float]]:
        e = self.edges
        return [(e[2 * n - 1], e[2 * n]) for n in range(1, self.n_bands)]

    @property
    def gap_lengths(self) -> List[float]:
        return [hi - lo for lo, hi in self.gaps]

    def to_dict(self) -> dict:
        return {
            "period": self.period,
            "edges": list(self.edges),
            "gap_lengths": self.gap_lengths,
        }


def _require_periodic(V: Potential) -> float:
    if not V.is_periodic:
        raise ValueError(f"Potential '{V.name}' is not periodic")
    return float(V.period)


def monodromy(V: Potential, lam: complex, x0: float = 0.0) -> np.ndarray:
    """Transfer matrix over one period starting at x0; real for real lam, det = 1."""
    L = _require_periodic(V)
    M = fundamental_matrix(lambda x: float(V(x)) - lam, RealInterval(x0, x0 + L), breakpoints=V.breakpoints)
    if np.isrealobj(lam) or complex(lam).imag == 0:
        return M.real
    return M


def discriminant(V: Potential, lam: float) -> float:
    """Hill discriminant Delta(lam) = trace of the monodromy."""
    return float(np.trace(monodromy(V, float(lam))))


@dataclass(frozen=True)
class FloquetData:
    """Floquet multipliers at (z, x) and the log-derivatives of the matching Floquet solutions."""

    z: complex
    x: float
    multipliers: Tuple[complex, complex]
    log_derivatives: Tuple[complex, complex]

    def decaying_log_derivative(self, side: str) -> complex:
        """u'/u of the Floquet solution decaying toward `side`."""
        return self.log_derivatives[0] if side == "right" else self.log_derivatives[1]


def _eigen_log_derivative(M: np.ndarray, rho: complex) -> complex:
    m11, m12, m21, m22 = M[0, 0], M[0, 1], M[1, 0], M[1, 1]
    if abs(m12) >= abs(rho - m22):
        return complex((rho - m11) / m12)
    return complex(m21 / (rho - m22))


def floquet_multipliers(V: Potential, z: complex, x: float = 0.0) -> FloquetData:
    """
    Multipliers rho with |rho_0| <= |rho_1| (rho_0 rho_1 = 1) of the monodromy at base point x.

    The first Floquet solution decays toward +infinity, the second toward -infinity.
    """
    M = monodromy(V, complex(z), x)
    half = 0.5 * complex(np.trace(M))
    root = np.sqrt(half * half - 1.0)
    rho_a, rho_b = half + root, half - root
    small, large = (rho_a, rho_b) if abs(rho_a) <= abs(rho_b) else (rho_b, rho_a)
    large = 1.0 / small if abs(small) > 0 else large
    return FloquetData(complex(z), float(x), (complex(small), complex(large)),
                       (_eigen_log_derivative(M, small), _eigen_log_derivative(M, large)))


# ---------------------------------------------------------------------------
# Band edges
# ---------------------------------------------------------------------------

def _hill_matrix(coefficients: np.ndarray, modes: int, L: float, theta: float) -> np.ndarray:
    column = coefficients[np.arange(2 * modes + 1)]
    row = coefficients[-np.arange(2 * modes + 1)]
    H = toeplitz(column, row)
    m = np.arange(-modes, modes + 1)
    return H + np.diag(((2.0 * math.pi * m + theta) / L) ** 2)


def _fourier_edges(V: Potential, n_bands: int, modes: int) -> np.ndarray:
    """First 2 n_bands edges from periodic (theta = 0) and antiperiodic (theta = pi) plane-wave spectra."""
    L = float(V.period)
    samples = 8 * modes
    xs = np.arange(samples) * L / samples
    coefficients = np.fft.fft(np.asarray(V(xs), dtype=float)) / samples
    periodic_eigs = eigvalsh(_hill_matrix(coefficients, modes, L, 0.0))
    anti_eigs = eigvalsh(_hill_matrix(coefficients, modes, L, math.pi))
    union = np.sort(np.concatenate([periodic_eigs, anti_eigs]))
    return union[:2 * n_bands]


def _edge_target(j: int) -> float:
    """+2 for periodic edges E_0, E_3, E_4, E_7, ...; -2 for antiperiodic ones."""
    if j == 0:
        return 2.0
    return -2.0 if ((j + 1) // 2) % 2 else 2.0


def _refine_edges(V: Potential, edges: np.ndarray) -> np.ndarray:
    refined = edges.copy()
    for j, E in enumerate(edges):
        delta = 1e-6 * max(1.0, abs(E))
        neighbours = [edges[i] for i in (j - 1, j + 1) if 0 <= i < edges.size]
        if any(abs(E - other) <= 2.0 * delta for other in neighbours):
            continue
        target = _edge_target(j)
        f = lambda lam: discriminant(V, lam) - target
        try:
            refined[j] = find_root_bracketed(f, RealInterval(E - delta, E + delta), tol=ROOT_TOL)
        except BracketError:
            logger.debug(f"Keeping plane-wave value for edge {j} at {E:.12g}")
    return refined


def _collapse_closed_gaps(edges: np.ndarray) -> np.ndarray:
    edges = edges.copy()
    for n in range(1, edges.size // 2):
        lo, hi = edges[2 * n - 1], edges[2 * n]
        if hi - lo < CLOSED_GAP_TOL:
            edges[2 * n - 1] = edges[2 * n] = 0.5 * (lo + hi)
    return edges


def _discriminant_edges(V: Potential, n_bands: int) -> np.ndarray:
    """Roots of Delta = +-2 from a scan uniform in sqrt(energy), tangential touches resolved at extrema."""
    L = float(V.period)
    V_min = V.lower_bound
    V_max = float(np.max(np.asarray(V(np.linspace(0.0, L, 257)), dtype=float)))
    top = V_max + (math.pi * (n_bands + 1) / L) ** 2 + 1.0
    k = np.linspace(0.0, math.sqrt(top - V_min + 1.0), DISCRIMINANT_POINTS_PER_BAND * (n_bands + 2))
    grid = V_min - 1.0 + k ** 2
    values = np.array([discriminant(V, lam) for lam in grid])

    roots: List[float] = []
    for target in (2.0, -2.0):
        g = values - target
        for i in range(grid.size - 1):
            if g[i] == 0:
                roots.append(float(grid[i]))
            elif g[i] * g[i + 1] < 0:
                f = lambda lam, t=target: discriminant(V, lam) - t
                roots.append(find_root_bracketed(f, RealInterval(grid[i], grid[i + 1])))

    for i in range(1, grid.size - 1):
        is_max = values[i] >= values[i - 1] and values[i] >= values[i + 1]
        is_min = values[i] <= values[i - 1] and values[i] <= values[i + 1]
        if not (is_max or is_min):
            continue
        sign = -1.0 if is_max else 1.0
        res = minimize_scalar(lambda lam: sign * discriminant(V, lam), bounds=(grid[i - 1], grid[i + 1]),
                              method="bounded", options={"xatol": 1e-12})
        peak = float(res.x)
        level = discriminant(V, peak)
        target = 2.0 if is_max else -2.0
        if (is_max and level > 2.0) or (is_min and level < -2.0):
            side = np.sign(values[i - 1] - target)
            if side == np.sign(values[i] - target) == np.sign(values[i + 1] - target) != np.sign(level - target):
                f = lambda lam, t=target: discriminant(V, lam) - t
                roots.append(find_root_bracketed(f, RealInterval(grid[i - 1], peak)))
                roots.append(find_root_bracketed(f, RealInterval(peak, grid[i + 1])))
        elif abs(abs(level) - 2.0) < 1e-6 and abs(values[i] - target) < 0.5:
            if not any(abs(r - peak) < 1e-6 for r in roots):
                roots.extend([peak, peak])

    edges = np.sort(np.asarray(roots))
    if edges.size < 2 * n_bands:
        raise BracketError(f"Discriminant scan found {edges.size} edges, need {2 * n_bands}")
    return edges[:2 * n_bands]


def band_edges(V: Potential, n_bands: int, method: str = "auto") -> BandStructure:
    """
    First 2 n_bands band edges.

    Args:
        V: Periodic potential
        n_bands: Number of bands
        method: "fourier", "discriminant", or "auto" (plane waves with a
            basis-doubling check, discriminant scan as fallback)

    Raises:
        BracketError: If the discriminant scan cannot resolve the edges
    """
    if n_bands < 1:
        raise ValueError(f"n_bands must be >= 1, got {n_bands}")
    L = _require_periodic(V)
    if method not in ("auto", "fourier", "discriminant"):
        raise ValueError(f"Unknown band edge method '{method}'")

    edges = None
    if method in ("auto", "fourier"):
        modes = max(FOURIER_MIN_MODES, 2 * n_bands + 24)
        edges = _fourier_edges(V, n_bands, modes)
        check = _fourier_edges(V, n_bands, 2 * modes)
        change = float(np.max(np.abs(check - edges) / np.maximum(1.0, np.abs(edges))))
        if change > CLOSED_GAP_TOL and method == "auto":
            logger.warning(f"Plane-wave basis not converged (change {change:.2e}), scanning discriminant")
            edges = None
        elif change > CLOSED_GAP_TOL:
            logger.warning(f"Plane-wave edges moved by {change:.2e} on basis doubling")
        else:
            edges = _refine_edges(V, edges)
    if edges is None:
        edges = _discriminant_edges(V, n_bands)

    edges = _collapse_closed_gaps(np.sort(edges))
    logger.info(f"Band edges for '{V.name}': {n_bands} bands, smallest gap "
                f"{min([edges[2 * n] - edges[2 * n - 1] for n in range(1, n_bands)], default=0.0):.3e}")
    return BandStructure(tuple(edges), L)


# ---------------------------------------------------------------------------
# Dirichlet data and xi
# ---------------------------------------------------------------------------

def _check_gap_interlacing(bands: BandStructure, mu: Sequence[float], tol: float) -> None:
    for n, value in enumerate(mu, start=1):
        if n >= bands.n_bands:
            break
        lo, hi = bands.edges[2 * n - 1], bands.edges[2 * n]
        if value < lo - tol or value > hi + tol:
            raise InterlacingError(f"mu_{n}={value:.12g} outside gap [{lo:.12g}, {hi:.12g}]")


def dirichlet_mu(V: Potential, x: float, n_count: int, bands: Optional[BandStructure] = None,
                 tol: float = INTERLACING_TOL) -> List[float]:
    """
    Dirichlet eigenvalues mu_1(x) < mu_2(x) < ... on [x, x + L].

    Raises:
        InterlacingError: If a mu_n leaves the closure of the n-th gap
    """
    from xitrace.schrodinger import dirichlet_eigenvalues

    L = _require_periodic(V)
    if n_count < 1:
        return []
    mu = dirichlet_eigenvalues(V, RealInterval(x, x + L), n_count)
    if bands is None:
        bands = band_edges(V, n_count + 1)
    _check_gap_interlacing(bands, mu, tol)
    return mu


def xi_periodic(bands: BandStructure, mu: Sequence[float], x: float = 0.0,
                tol: float = INTERLACING_TOL) -> XiGrid:
    """
    xi(x, .) of a periodic operator: 0 below E_0, 1/2 on bands, 1 on (E_{2n-1}, mu_n), 0 on (mu_n, E_{2n}).

    Closed gaps leave no feature. The result covers (-inf, E_{2N-1}]; the
    plateau above the last computed edge is only the start of the next gap
    and reports low_confidence.

    Raises:
        InterlacingError: If mu_n lies outside its gap
    """
    mu = [float(m) for m in mu]
    n_gaps = bands.n_bands - 1
    if len(mu) < n_gaps:
        raise ValueError(f"Need {n_gaps} Dirichlet eigenvalues for {bands.n_bands} bands, got {len(mu)}")
    _check_gap_interlacing(bands, mu[:n_gaps], tol)

    e = bands.edges
    jumps = [e[0]]
    values = [0.0, 0.5]
    for n in range(1, n_gaps + 1):
        lo, hi = e[2 * n - 1], e[2 * n]
        jumps.extend([lo, min(max(mu[n - 1], lo), hi), hi])
        values.extend([1.0, 0.0, 0.5])
    jumps.append(e[-1])
    values.append(1.0)
    step = StepFunction(jumps, values, merge_tol=CLOSED_GAP_TOL)
    return XiGrid.piecewise(x, step, coverage=(-math.inf, float(e[-1])))
