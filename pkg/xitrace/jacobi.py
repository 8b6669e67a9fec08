"""
Jacobi operators (hu)(n) = u(n+1) + u(n-1) + v(n)u(n).

Truncation to finite windows, deletion of a site (Dirichlet decoupling),
the exact counting-function xi of a finite matrix, continued-fraction
diagonal Green's functions, and the discrete trace formula.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from xitrace.config import (
    CF_DEPTH_CAP,
    CF_DEPTH_FACTOR,
    CF_TOL,
    DEFAULT_EPS_SCHEDULE,
    JACOBI_TIE_TOL,
)
from xitrace.errors import ContinuedFractionDepthError, CoverageError, InterlacingError
from xitrace.numerics import StepFunction
from xitrace.spectral import GreensValue, XiGrid, XiPoint, extrapolate_phase

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class JacobiOperator:
    """
    Bounded diagonal sequence v(n) with unit off-diagonals.

    Attributes:
        kind: constant, periodic, almost_mathieu, finite or function
        params: Parameters the operator was built from
        bound: sup |v(n)|
        cell: One period of v (periodic kinds) or the finite values
        offset: First site of the finite values
        exterior: "zero" (v = 0 outside) or "dirichlet" (sites absent) for finite kinds
        func: v(n) for the generic kind
    """

    kind: str
    params: Dict[str, Any]
    bound: float
    cell: Tuple[float, ...] = ()
    offset: int = 0
    exterior: str = "zero"
    func: Optional[Callable[[int], float]] = field(default=None, repr=False)

    @classmethod
    def constant(cls, c: float) -> "JacobiOperator":
        return cls("constant", {"c": c}, abs(c), (float(c),))

    @classmethod
    def periodic(cls, values: Sequence[float]) -> "JacobiOperator":
        values = tuple(float(v) for v in values)
        if not values:
            raise ValueError("Periodic Jacobi operator needs at least one value")
        return cls("periodic", {"values": list(values)}, max(abs(v) for v in values), values)

    @classmethod
    def almost_mathieu(cls, coupling: float, p: int, q: int, theta: float = 0.0) -> "JacobiOperator":
        """v(n) = coupling * cos(pi p n / q + theta); period 2q for odd p, q for even p."""
        if q < 1 or math.gcd(p, q) != 1:
            raise ValueError(f"Almost-Mathieu frequency needs q >= 1 and gcd(p, q) = 1, got {p}/{q}")
        period = 2 * q if p % 2 else q
        cell = tuple(coupling * math.cos(math.pi * p * n / q + theta) for n in range(period))
        params = {"coupling": coupling, "p": p, "q": q, "theta": theta}
        return cls("almost_mathieu", params, abs(coupling), cell)

    @classmethod
    def finite(cls, values: Sequence[float], offset: int = 0, exterior: str = "zero") -> "JacobiOperator":
        if exterior not in ("zero", "dirichlet"):
            raise ValueError(f"Unknown exterior '{exterior}', expected 'zero' or 'dirichlet'")
        values = tuple(float(v) for v in values)
        if not values:
            raise ValueError("Finite Jacobi operator needs at least one value")
        params = {"values": list(values), "offset": offset, "exterior": exterior}
        return cls("finite", params, max(abs(v) for v in values), values, offset, exterior)

    @classmethod
    def from_function(cls, func: Callable[[int], float], bound: float) -> "JacobiOperator":
        return cls("function", {"bound": bound}, float(bound), func=func)

    @property
    def period(self) -> Optional[int]:
        return len(self.cell) if self.kind in ("constant", "periodic", "almost_mathieu") else None

    @property
    def support(self) -> Optional[Tuple[int, int]]:
        if self.kind != "finite":
            return None
        return self.offset, self.offset + len(self.cell) - 1

    def spectrum_bounds(self) -> Tuple[float, float]:
        return -2.0 - self.bound, 2.0 + self.bound

    def v(self, n: int) -> float:
        if self.kind == "almost_mathieu":
            p = self.params
            return p["coupling"] * math.cos(math.pi * p["p"] * n / p["q"] + p["theta"])
        if self.period is not None:
            return self.cell[n % self.period]
        if self.kind == "finite":
            a, b = self.support
            if a <= n <= b:
                return self.cell[n - a]
            if self.exterior == "dirichlet":
                raise ValueError(f"Site {n} lies outside the finite operator on [{a}, {b}]")
            return 0.0
        return float(self.func(n))

    def diagonal(self, a: int, b: int) -> np.ndarray:
        return np.array([self.v(n) for n in range(a, b + 1)], dtype=float)

    def shifted(self, c: float) -> "JacobiOperator":
        """h + c."""
        if self.kind == "function":
            base = self.func
            return JacobiOperator.from_function(lambda n: base(n) + c, self.bound + abs(c))
        if self.kind == "finite":
            if self.exterior == "zero" and c != 0:
                raise ValueError("Shifting a zero-exterior finite operator changes its exterior")
            return JacobiOperator.finite([v + c for v in self.cell], self.offset, self.exterior)
        return JacobiOperator.periodic([self.v(n) + c for n in range(self.period)])


@dataclass(frozen=True, eq=False)
class TruncatedJacobi:
    """Finite symmetric tridiagonal section on the window [a, b]; b = a - 1 means empty."""

    window: Tuple[int, int]
    diagonal: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diagonal, dtype=float).ravel()
        object.__setattr__(self, "diagonal", d)
        if d.size != self.size:
            raise ValueError(f"Diagonal length {d.size} does not match window {self.window}")

    @property
    def size(self) -> int:
        return max(self.window[1] - self.window[0] + 1, 0)

    @property
    def matrix(self) -> np.ndarray:
        n = self.size
        off = np.ones(max(n - 1, 0))
        return np.diag(self.diagonal) + np.diag(off, 1) + np.diag(off, -1)

    @property
    def norm_bound(self) -> float:
        return float(np.max(np.abs(self.diagonal))) + 2.0 if self.size else 0.0


@dataclass(frozen=True)
class DirichletSite:
    """Site n removed by Dirichlet decoupling."""

    n: int


def truncate(h: JacobiOperator, window: Tuple[int, int]) -> TruncatedJacobi:
    """
    Restrict h to the sites a..b.

    Raises:
        ValueError: If the window is empty or leaves the support of a
            Dirichlet-exterior finite operator
    """
    a, b = int(window[0]), int(window[1])
    if b < a:
        raise ValueError(f"Truncation window must be nonempty, got [{a}, {b}]")
    if h.kind == "finite" and h.exterior == "dirichlet":
        lo, hi = h.support
        if a < lo or b > hi:
            raise ValueError(f"Window [{a}, {b}] leaves the support [{lo}, {hi}]")
    return TruncatedJacobi((a, b), h.diagonal(a, b))


def dirichlet_decouple(t: TruncatedJacobi, site: DirichletSite) -> Tuple[TruncatedJacobi, TruncatedJacobi]:
    """Delete the row and column of `site`; returns the left and right blocks."""
    a, b = t.window
    if not a <= site.n <= b:
        raise ValueError(f"Site {site.n} outside window [{a}, {b}]")
    k = site.n - a
    left = TruncatedJacobi((a, site.n - 1), t.diagonal[:k])
    right = TruncatedJacobi((site.n + 1, b), t.diagonal[k + 1:])
    return left, right


def eigenvalues_tridiagonal(t: TruncatedJacobi) -> np.ndarray:
    """All eigenvalues, ascending."""
    if t.size == 0:
        return np.array([])
    if t.size == 1:
        return t.diagonal.copy()
    return eigvalsh_tridiagonal(t.diagonal, np.ones(t.size - 1))


def counting_step(t: TruncatedJacobi, site: DirichletSite) -> StepFunction:
    """
    xi as #{eig(t) <= lam} - #{eig(decoupled) <= lam}.

    Raises:
        InterlacingError: If the counting difference leaves {0, 1}
    """
    left, right = dirichlet_decouple(t, site)
    full = eigenvalues_tridiagonal(t)
    removed = np.concatenate([eigenvalues_tridiagonal(left), eigenvalues_tridiagonal(right)])
    locations = np.concatenate([full, removed])
    weights = np.concatenate([np.ones(full.size), -np.ones(removed.size)])
    order = np.argsort(locations, kind="stable")
    values = np.concatenate([[0.0], np.cumsum(weights[order])])
    tol = JACOBI_TIE_TOL * max(1.0, t.norm_bound)
    step = StepFunction(locations[order], values, merge_tol=tol)
    if not np.all((step.values == 0.0) | (step.values == 1.0)):
        raise InterlacingError(f"Counting xi left {{0, 1}}: plateaus {step.values.tolist()}")
    return step


def xi_counting(t: TruncatedJacobi, site: DirichletSite, lam: float) -> int:
    """Counting xi at a single energy; ties count as <= lam."""
    return int(counting_step(t, site)(lam))


def xi_counting_function(t: TruncatedJacobi, site: DirichletSite) -> XiGrid:
    """Counting xi of a finite section as an exact piecewise-constant XiGrid."""
    return XiGrid.piecewise(site.n, counting_step(t, site))


# ---------------------------------------------------------------------------
# Continued-fraction Green's function
# ---------------------------------------------------------------------------

def free_m(z: complex, c: float = 0.0) -> complex:
    """Half-line m-function of v = c: root of m^2 + (z - c)m + 1 = 0 with Im m > 0."""
    w = complex(z) - c
    m = -0.5 * w * (1.0 - np.sqrt(1.0 - 4.0 / (w * w)))
    if m.imag < 0:
        m = 1.0 / m
    return complex(m)


def _mobius_fixed_point(diagonals: Sequence[float], z: complex) -> complex:
    """Upper half-plane fixed point of m -> f_1(f_2(...f_P(m))), f_k(m) = 1/(v_k - z - m)."""
    T = np.eye(2, dtype=complex)
    for v in diagonals:
        T = T @ np.array([[0.0, 1.0], [-1.0, v - z]], dtype=complex)
        T /= np.max(np.abs(T))
    a, b, c, d = T[0, 0], T[0, 1], T[1, 0], T[1, 1]
    if abs(c) < 1e-300:
        return complex(b / (d - a))
    disc = np.sqrt((d - a) ** 2 + 4.0 * b * c)
    roots = [(-(d - a) + disc) / (2.0 * c), (-(d - a) - disc) / (2.0 * c)]
    return complex(max(roots, key=lambda r: r.imag))


def _recurse(m: complex, diagonals: Sequence[float], z: complex) -> complex:
    """Apply m -> 1/(v - z - m) for v in order (farthest site first)."""
    for v in diagonals:
        m = 1.0 / (v - z - m)
    return m


def _depth_for(z: complex, depth: Optional[int]) -> int:
    if depth is not None:
        if depth < 1:
            raise ValueError(f"Continued fraction depth must be >= 1, got {depth}")
        return int(depth)
    return int(min(math.ceil(CF_DEPTH_FACTOR / z.imag), CF_DEPTH_CAP))


def _half_line_m(h: JacobiOperator, n: int, z: complex, direction: int, depth: Optional[int]) -> complex:
    """m_+(n) = G_{[n+1, inf)}(n+1, n+1) for direction +1, m_-(n) mirrored for -1."""
    if h.period is not None:
        P = h.period
        sites = [n + direction * k for k in range(1, P + 1)]
        return _mobius_fixed_point([h.v(k) for k in sites], z)

    if h.kind == "finite":
        a, b = h.support
        start = 0j if h.exterior == "dirichlet" else free_m(z)
        if direction > 0:
            sites = range(max(b, n), n, -1)
        else:
            sites = range(min(a, n), n)
        return _recurse(start, [h.v(k) for k in sites], z)

    d = _depth_for(z, depth)
    far = [h.v(n + direction * k) for k in range(d, 0, -1)]
    m_full = _recurse(0j, far, z)
    m_half = _recurse(0j, far[d - d // 2:], z)
    if abs(m_full - m_half) > CF_TOL * max(1.0, abs(m_full)):
        raise ContinuedFractionDepthError(
            f"Depth {d} insufficient at Im z={z.imag:.1e}: |m_d - m_d/2| = {abs(m_full - m_half):.2e}"
        )
    return m_full


def green_diagonal(h: JacobiOperator, n: int, z: complex, depth: Optional[int] = None) -> GreensValue:
    """
    G(n, n; z) = 1/(v(n) - z - m_+ - m_-) from half-line continued fractions.

    Constant and periodic operators close exactly through the fixed point of
    the period map, finite operators through their exterior; only generic
    sequences are truncated at `depth`, validated against depth/2.

    Raises:
        ValueError: If Im z <= 0
        ContinuedFractionDepthError: If the truncated fraction has not converged
    """
    z = complex(z)
    if z.imag <= 0:
        raise ValueError(f"Green's function needs Im z > 0, got {z}")
    m_plus = _half_line_m(h, n, z, +1, depth)
    m_minus = _half_line_m(h, n, z, -1, depth)
    return GreensValue(z, complex(1.0 / (h.v(n) - z - m_plus - m_minus)), continuum=False)


def xi_arg(h: JacobiOperator, n: int, lam: float, eps_schedule: Sequence[float] = DEFAULT_EPS_SCHEDULE,
           depth: Optional[int] = None) -> XiPoint:
    """xi(n, lam) = Arg G(n, n; lam + i0) / pi, extrapolated over the eps schedule."""
    eps = [float(e) for e in eps_schedule]
    if any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError(f"eps schedule must be positive and decreasing: {eps}")
    phases = [green_diagonal(h, n, lam + 1j * e, depth).phase for e in eps]
    return extrapolate_phase(lam, eps, phases)


def trace_formula_jacobi(xi: XiGrid, E_minus: Optional[float] = None, E_plus: Optional[float] = None) -> float:
    """
    v(n) = (E_- + E_+)/2 + integral over [E_-, E_+] of (1/2 - xi(n, lam)).

    Defaults for E_- and E_+ are the outermost jumps of a piecewise xi.

    Raises:
        CoverageError: If xi does not cover [E_-, E_+]
    """
    if E_minus is None or E_plus is None:
        if xi.is_piecewise:
            if not xi.jumps.size:
                raise ValueError("Piecewise xi without jumps needs explicit E_- and E_+")
            E_minus = float(xi.jumps[0]) if E_minus is None else E_minus
            E_plus = float(xi.jumps[-1]) if E_plus is None else E_plus
        else:
            E_minus = float(xi.lambdas[0]) if E_minus is None else E_minus
            E_plus = float(xi.lambdas[-1]) if E_plus is None else E_plus
    if E_minus > E_plus:
        raise ValueError(f"Need E_- <= E_+, got {E_minus} > {E_plus}")
    if not xi.covers(E_minus, E_plus):
        raise CoverageError(f"xi covers {xi.coverage}, formula needs [{E_minus}, {E_plus}]")
    if E_minus == E_plus:
        return float(E_plus)
    return float(E_plus - xi.function().integrate(E_minus, E_plus))


def heat_trace_difference(t: TruncatedJacobi, site: DirichletSite, alpha: float) -> Tuple[float, float]:
    """
    Both sides of Tr(exp(-alpha h) - exp(-alpha h_D)) = alpha * integral exp(-alpha lam) xi(lam).

    Returns:
        (eigenvalue sum, xi integral)
    """
    left, right = dirichlet_decouple(t, site)
    full = eigenvalues_tridiagonal(t)
    removed = np.concatenate([eigenvalues_tridiagonal(left), eigenvalues_tridiagonal(right)])
    direct = float(np.sum(np.exp(-alpha * full)) - np.sum(np.exp(-alpha * removed)))
    step = counting_step(t, site)
    origin = float(full[0])
    from_xi = alpha * math.exp(-alpha * origin) * step.laplace(alpha, origin)
    return direct, float(from_xi)
