"""
Continuum operators H = -d^2/dx^2 + V(x) on the line.

Weyl solutions and the diagonal Green's function G(x, x; z), xi(x, lam) as the
boundary phase of G, Dirichlet eigenvalues by Prufer shooting, and the exact
step-function xi of confining potentials built from E_n and mu_n(x).
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from xitrace.config import (
    BOX_TOL,
    CUTOFF_TOL,
    DEFAULT_EPS_SCHEDULE,
    INTERLACING_TOL,
    JUMP_MERGE_TOL,
    MAX_BOX_GROWTH,
    ROOT_TOL,
    STIFF_FORBIDDEN_GAP,
    WALL_MARGIN,
    WEYL_DEFAULT_CUTOFF,
    WRONSKIAN_TOL,
)
from xitrace.errors import (
    BoxConvergenceError,
    BracketError,
    CutoffSensitivityError,
    InterlacingError,
    WronskianError,
)
from xitrace.numerics import (
    RealInterval,
    StepFunction,
    find_root_bracketed,
    integrate_log_derivative,
    integrate_ode,
    prufer_angle,
)
from xitrace.potentials import Potential
from xitrace.spectral import GreensValue, XiGrid, XiPoint, extrapolate_phase

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WholeLine:
    """The line, realized as [-L, L] with Dirichlet walls; L grows automatically unless given."""

    cutoff: Optional[float] = None


@dataclass(frozen=True)
class DirichletPoint:
    """H_D^x: Dirichlet condition at x splitting the line into two half-lines."""

    x: float
    cutoff: Optional[float] = None

    def __post_init__(self):
        if not math.isfinite(self.x):
            raise ValueError(f"Dirichlet point must be finite, got {self.x}")


Domain = Union[RealInterval, WholeLine, DirichletPoint]


def _coefficient(V: Potential, z: complex):
    return lambda x: float(V(x)) - z


# ---------------------------------------------------------------------------
# Weyl solutions
# ---------------------------------------------------------------------------

def _exterior_root(V: Potential, X: float, z: complex) -> complex:
    """sqrt(V(X) - z), principal branch: Re > 0 whenever Im z > 0."""
    return complex(np.sqrt(complex(float(V(X)) - z)))


def _propagate(V: Potential, z: complex, w: complex, start: float, x: float) -> complex:
    """Carry the log-derivative w from `start` to x in value form."""
    if start == x:
        return w
    span = RealInterval(min(start, x), max(start, x))
    traj = integrate_ode(_coefficient(V, z), (1.0, w), span, backward=start > x,
                         breakpoints=V.breakpoints)
    return traj.end_log_derivative


def _flat_log_derivative(V: Potential, z: complex, side: str, x: float) -> complex:
    R = V.flat_beyond
    if side == "right":
        X = max(R, x)
        return _propagate(V, z, -_exterior_root(V, X + 1.0, z), X, x)
    X = min(-R, x)
    return _propagate(V, z, _exterior_root(V, X - 1.0, z), X, x)


def _periodic_log_derivative(V: Potential, z: complex, side: str, x: float) -> complex:
    from xitrace.periodic import floquet_multipliers

    floquet = floquet_multipliers(V, z, x)
    return floquet.decaying_log_derivative(side)


def _cutoff_log_derivative(V: Potential, z: complex, side: str, x: float, cutoff: float) -> complex:
    """WKB start at +-cutoff, Riccati through the forbidden zone, value form to x."""
    sign = 1.0 if side == "right" else -1.0
    X = sign * cutoff
    w = -sign * _exterior_root(V, X, z)
    if V.confining:
        turning = V.turning_radius(max(z.real, float(V(x))))
        inner = sign * min(turning, cutoff)
        if sign * inner > sign * x and inner != X:
            span = RealInterval(min(X, inner), max(X, inner))
            w = integrate_log_derivative(_coefficient(V, z), w, span, backward=sign > 0,
                                         breakpoints=V.breakpoints)
            X = inner
    return _propagate(V, z, w, X, x)


def _default_cutoff(V: Potential, z: complex, x: float) -> float:
    if V.confining:
        return max(V.turning_radius(max(z.real, float(V(x)))), abs(x)) + WALL_MARGIN
    return abs(x) + WEYL_DEFAULT_CUTOFF


def weyl_log_derivative(V: Potential, z: complex, side: str, x: float,
                        cutoff: Optional[float] = None, check_cutoff: bool = False) -> complex:
    """
    u'/u at x for the solution square-integrable toward `side`.

    Potentials flat beyond a radius start from the exact exterior exponential,
    periodic ones from the decaying Floquet solution; all others start from a
    WKB-decaying value at the cutoff.

    Raises:
        ValueError: If Im z <= 0 or side is unknown
        CutoffSensitivityError: If check_cutoff is set and doubling the cutoff
            moves the log-derivative by more than CUTOFF_TOL
    """
    z = complex(z)
    if z.imag <= 0:
        raise ValueError(f"Weyl solution needs Im z > 0, got {z}")
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got '{side}'")

    if V.flat_beyond is not None and cutoff is None:
        return _flat_log_derivative(V, z, side, x)
    if V.is_periodic:
        return _periodic_log_derivative(V, z, side, x)

    L = cutoff if cutoff is not None else _default_cutoff(V, z, x)
    if L <= abs(x):
        raise ValueError(f"Cutoff {L} must exceed |x| = {abs(x)}")
    w = _cutoff_log_derivative(V, z, side, x, L)
    if check_cutoff:
        w2 = _cutoff_log_derivative(V, z, side, x, 2.0 * L)
        if abs(w2 - w) > CUTOFF_TOL * max(1.0, abs(w)):
            raise CutoffSensitivityError(
                f"Doubling cutoff {L} moved u'/u at x={x} from {w} to {w2}"
            )
    return w


def weyl_solution(V: Potential, z: complex, side: str, x: float,
                  cutoff: Optional[float] = None, check_cutoff: bool = False) -> Tuple[complex, complex]:
    """(u(x), u'(x)) of the Weyl solution, normalized to u(x) = 1."""
    return 1.0 + 0j, weyl_log_derivative(V, z, side, x, cutoff, check_cutoff)


def green_diagonal_schrodinger(V: Potential, x: float, z: complex,
                               cutoff: Optional[float] = None) -> GreensValue:
    """
    G(x, x; z) = 2 / (w_- - w_+) from the Weyl log-derivatives.

    Normalized so that V = 0 gives (-z)^(-1/2).

    Raises:
        WronskianError: If w_- and w_+ coincide numerically
    """
    w_minus = weyl_log_derivative(V, z, "left", x, cutoff)
    w_plus = weyl_log_derivative(V, z, "right", x, cutoff)
    diff = w_minus - w_plus
    if abs(diff) < WRONSKIAN_TOL * max(1.0, abs(w_minus), abs(w_plus)):
        raise WronskianError(f"Wronskian vanished at x={x}, z={z}")
    return GreensValue(complex(z), 2.0 / diff)


def xi_schrodinger(V: Potential, x: float, lam: float,
                   eps_schedule: Sequence[float] = DEFAULT_EPS_SCHEDULE,
                   cutoff: Optional[float] = None) -> XiPoint:
    """xi(x, lam) = Arg G(x, x; lam + i0) / pi, extrapolated over the eps schedule."""
    eps = [float(e) for e in eps_schedule]
    if any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError(f"eps schedule must be positive and decreasing: {eps}")
    phases = [green_diagonal_schrodinger(V, x, lam + 1j * e, cutoff).phase for e in eps]
    point = extrapolate_phase(lam, eps, phases)
    if not point.converged:
        logger.debug(f"xi({x}, {lam}) flagged as a possible jump point")
    return point


# ---------------------------------------------------------------------------
# Dirichlet eigenvalues by Prufer shooting
# ---------------------------------------------------------------------------

def _prufer_scale(V_min: float, energy: float) -> float:
    return math.sqrt(max(energy - V_min, 1.0))


def _match_point(V: Potential, a: float, b: float) -> float:
    xs = np.linspace(a, b, 201)
    xm = float(xs[np.argmin(np.asarray(V(xs), dtype=float))])
    margin = 0.05 * (b - a)
    return min(max(xm, a + margin), b - margin)


def oscillation_count(V: Potential, energy: float, interval: RealInterval) -> int:
    """Zeros in (a, b] of the solution with u(a) = 0; equals #{Dirichlet eigenvalues < energy}."""
    V_min = float(np.min(np.asarray(V(np.linspace(interval.lo, interval.hi, 201)), dtype=float)))
    theta = prufer_angle(V, energy, interval.lo, interval.hi, 0.0, _prufer_scale(V_min, energy),
                         breakpoints=V.breakpoints)
    return int(math.floor(theta / math.pi))


class _Shooter:
    """Prufer matching on [a, b]: the k-th eigenvalue is the root of an increasing function."""

    def __init__(self, V: Potential, a: float, b: float):
        self.V = V
        self.a, self.b = a, b
        self.xm = _match_point(V, a, b)
        self.xs = np.linspace(a, b, 401)
        self.Vs = np.asarray(V(self.xs), dtype=float)
        self.V_min = float(np.min(self.Vs))
        self._cache: Dict[Tuple[float, int], float] = {}

    def _deep_edge(self, energy: float, from_left: bool) -> Optional[float]:
        """Inner end of the strongly forbidden run touching the wall, if any."""
        deep = self.Vs - energy > STIFF_FORBIDDEN_GAP
        if not from_left:
            deep = deep[::-1]
        run = deep.size if deep.all() else int(np.argmin(deep))
        if run < 2:
            return None
        edge = float(self.xs[run - 1] if from_left else self.xs[-run])
        if (from_left and edge >= self.xm) or (not from_left and edge <= self.xm):
            return None
        return edge

    def _phase(self, energy: float, start: float, initial: float, S: float) -> float:
        edge = self._deep_edge(energy, start < self.xm)
        if edge is not None:
            initial = prufer_angle(self.V, energy, start, edge, initial, S,
                                   breakpoints=self.V.breakpoints, method="LSODA")
            start = edge
        return prufer_angle(self.V, energy, start, self.xm, initial, S, breakpoints=self.V.breakpoints)

    def mismatch(self, energy: float, k: int) -> float:
        key = (float(energy), k)
        if key not in self._cache:
            S = _prufer_scale(self.V_min, energy)
            left = self._phase(energy, self.a, 0.0, S)
            right = self._phase(energy, self.b, (k + 1) * math.pi, S)
            self._cache[key] = left - right
        return self._cache[key]

    def eigenvalue(self, k: int, lower: float, guess_step: float) -> float:
        f = lambda E: self.mismatch(E, k)
        lo, step = lower, guess_step
        while f(lo) > 0:
            lo -= step
            step *= 2.0
        hi, step = lo + guess_step, guess_step
        for _ in range(200):
            if f(hi) > 0:
                return find_root_bracketed(f, RealInterval(lo, hi), tol=ROOT_TOL)
            lo, hi, step = hi, hi + 2.0 * step, 2.0 * step
        raise BracketError(f"Could not bracket Dirichlet eigenvalue {k} on [{self.a}, {self.b}]")

    def spectrum(self, count: int) -> List[float]:
        width = self.b - self.a
        values: List[float] = []
        lower = self.V_min - 1.0
        for k in range(count):
            step = max((math.pi / width) ** 2 * (2 * k + 1), 0.5)
            if len(values) >= 2:
                step = max(step, 1.2 * (values[-1] - values[-2]))
            E = self.eigenvalue(k, lower, step)
            values.append(E)
            lower = E
        return values

    def update(self, previous: Sequence[float], polish: bool) -> List[float]:
        """
        Eigenvalues from a nearby box, re-shooting only those that moved.

        A root still inside E +- BOX_TOL * max(1, |E|) / 2 keeps E, or is
        polished inside that bracket when `polish` is set.
        """
        values: List[float] = []
        for k, E in enumerate(previous):
            f = lambda e, k=k: self.mismatch(e, k)
            delta = 0.5 * BOX_TOL * max(1.0, abs(E))
            if f(E - delta) <= 0.0 <= f(E + delta):
                values.append(find_root_bracketed(f, RealInterval(E - delta, E + delta), tol=ROOT_TOL)
                              if polish else float(E))
            else:
                values.append(self.eigenvalue(k, E, max(1e-3, 1e-3 * abs(E))))
        return values


def _interval_eigenvalues(V: Potential, a: float, b: float, count: int) -> List[float]:
    return _Shooter(V, a, b).spectrum(count)


def _box_spectra(V: Potential, L: float, count: int, split: Optional[float],
                 previous: Optional[List[List[float]]] = None, polish: bool = True) -> List[List[float]]:
    """Per-interval spectra of [-L, L], cut at `split` into two half-line boxes when given."""
    intervals = [(-L, L)] if split is None else [(-L, split), (split, L)]
    spectra = []
    for i, (a, b) in enumerate(intervals):
        shooter = _Shooter(V, a, b)
        spectra.append(shooter.spectrum(count) if previous is None else shooter.update(previous[i], polish))
    return spectra


def _lowest(spectra: List[List[float]], count: int) -> List[float]:
    return sorted(E for spectrum in spectra for E in spectrum)[:count]


def _confined_spectrum(V: Potential, count: int, split: Optional[float], cutoff: Optional[float]) -> List[float]:
    """Grow the box until the top eigenvalue's turning point sits WALL_MARGIN inside, then gate on doubling."""
    if not V.confining:
        raise ValueError(f"Line problems need a confining potential, '{V.name}' is not")
    reach = abs(split) if split is not None else 0.0
    if cutoff is not None:
        L = float(cutoff)
        spectra = _box_spectra(V, L, count, split)
    else:
        L = max(V.turning_radius(V.lower_bound + 2.0 * count + 1.0), reach) + WALL_MARGIN
        spectra = _box_spectra(V, L, count, split)
        for _ in range(MAX_BOX_GROWTH):
            needed = max(V.turning_radius(_lowest(spectra, count)[-1]), reach) + WALL_MARGIN
            if needed <= L:
                break
            L = needed
            logger.debug(f"Growing box to L={L:.3f}")
            spectra = _box_spectra(V, L, count, split, spectra)
    values = _lowest(spectra, count)

    doubled = _lowest(_box_spectra(V, 2.0 * L, count, split, spectra, polish=False), count)
    change = float(np.max(np.abs(np.asarray(doubled) - np.asarray(values))))
    if change >= BOX_TOL * max(1.0, abs(values[-1])):
        raise BoxConvergenceError(f"Doubling box L={L:.3f} moved eigenvalues by {change:.2e}")
    return values


def dirichlet_eigenvalues(V: Potential, domain: Domain, count: int) -> List[float]:
    """
    First `count` Dirichlet eigenvalues, ascending.

    Args:
        V: Potential
        domain: RealInterval with u = 0 at both ends, WholeLine (eigenvalues
            E_n of a confining V) or DirichletPoint (mu_n(x), the union of
            both half-line spectra)
        count: Number of eigenvalues

    Raises:
        BoxConvergenceError: If doubling the line box changes the eigenvalues
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if isinstance(domain, RealInterval):
        return _interval_eigenvalues(V, domain.lo, domain.hi, count)
    if isinstance(domain, WholeLine):
        return _confined_spectrum(V, count, None, domain.cutoff)
    if isinstance(domain, DirichletPoint):
        return _confined_spectrum(V, count, domain.x, domain.cutoff)
    raise TypeError(f"Unsupported domain: {domain!r}")


def half_line_dirichlet_eigenvalues(V: Potential, x: float, count: int) -> List[float]:
    """Spectrum of H_D^x for a confining V."""
    return dirichlet_eigenvalues(V, DirichletPoint(x), count)


# ---------------------------------------------------------------------------
# Step-function xi for confining potentials
# ---------------------------------------------------------------------------

def xi_confining(V: Optional[Potential], x: float, E_list: Sequence[float], mu_list: Sequence[float],
                 tol: float = INTERLACING_TOL) -> XiGrid:
    """
    xi(x, .) = #{E_n <= lam} - #{mu_n(x) <= lam}, as an exact step function.

    Only mu_1..mu_{N-1} are used for N eigenvalues E_0..E_{N-1}; the result
    covers (-inf, E_{N-1}].

    Raises:
        InterlacingError: If E_{n-1} <= mu_n <= E_n fails beyond tol
    """
    E = np.sort(np.asarray(E_list, dtype=float))
    mu = np.sort(np.asarray(mu_list, dtype=float))
    if E.size < 1:
        raise ValueError("xi_confining needs at least one eigenvalue")
    if mu.size < E.size - 1:
        raise ValueError(f"Need {E.size - 1} Dirichlet eigenvalues, got {mu.size}")
    mu = mu[:E.size - 1]

    bad = np.nonzero((mu < E[:-1] - tol) | (mu > E[1:] + tol))[0]
    if bad.size:
        n = int(bad[0]) + 1
        raise InterlacingError(
            f"Interlacing fails at n={n}: E_{n - 1}={E[n - 1]:.10g}, mu_{n}={mu[n - 1]:.10g}, E_{n}={E[n]:.10g}"
        )

    locations = np.concatenate([E, mu])
    weights = np.concatenate([np.ones(E.size), -np.ones(mu.size)])
    order = np.argsort(locations, kind="stable")
    values = np.concatenate([[0.0], np.cumsum(weights[order])])
    step = StepFunction(locations[order], values, merge_tol=max(tol, JUMP_MERGE_TOL))
    if not np.all((step.values == 0.0) | (step.values == 1.0)):
        raise InterlacingError(f"Counting xi left {{0, 1}}: plateaus {step.values.tolist()}")
    return XiGrid.piecewise(x, step, coverage=(-math.inf, float(E[-1])))
