"""
Shared numerical kernels: ODE propagation for -u'' + (V - z)u = 0, bracketed
root finding, exact quadrature of step functions and Abelian (alpha -> 0)
extrapolation.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import quad, solve_ivp, trapezoid
from scipy.optimize import brentq

from xitrace.config import (
    ABEL_TRUNCATION,
    COVERAGE_ALPHAS,
    DEFAULT_ABEL_ALPHAS,
    ODE_TOL,
    RESCALE_THRESHOLD,
    ROOT_TOL,
    SHOOTING_TOL,
)
from xitrace.errors import BracketError, StepSizeUnderflowError, UnsortedJumpsError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RealInterval:
    """Finite real interval [lo, hi] with lo < hi."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError(f"Interval endpoints must be finite: [{self.lo}, {self.hi}]")
        if not self.lo < self.hi:
            raise ValueError(f"Interval must satisfy lo < hi: [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, value: float) -> bool:
        return self.lo <= value <= self.hi


@dataclass(frozen=True)
class AbelSchedule:
    """
    Regularization parameters for an Abel-summed spectral integral.

    Attributes:
        alphas: Strictly decreasing positive damping rates (1/energy)
        cutoff: Upper energy limit Lambda_max of the integration
    """

    alphas: Tuple[float, ...]
    cutoff: float

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        object.__setattr__(self, "alphas", alphas)
        if len(alphas) < 3:
            raise ValueError(f"Abel schedule needs at least 3 alphas, got {len(alphas)}")
        if any(a <= 0 for a in alphas):
            raise ValueError(f"Abel alphas must be positive: {alphas}")
        if any(b >= a for a, b in zip(alphas, alphas[1:])):
            raise ValueError(f"Abel alphas must be strictly decreasing: {alphas}")
        if not math.isfinite(self.cutoff):
            raise ValueError(f"Abel cutoff must be finite: {self.cutoff}")

    @classmethod
    def default(cls, E0: float, alphas: Sequence[float] = DEFAULT_ABEL_ALPHAS) -> "AbelSchedule":
        """Schedule whose cutoff makes exp(-alpha_min (cutoff - E0)) < ABEL_TRUNCATION."""
        alpha_min = min(alphas)
        cutoff = E0 + math.log(1.0 / ABEL_TRUNCATION) / alpha_min
        return cls(tuple(alphas), cutoff)

    @classmethod
    def for_coverage(cls, E0: float, upper: float,
                     alphas: Sequence[float] = COVERAGE_ALPHAS) -> "AbelSchedule":
        """
        Schedule scaled to data that stops at `upper`.

        The rates are measured in units of 1/(upper - E0) so that the
        quadratic extrapolation stays accurate over the whole covered range.
        """
        span = upper - E0
        if span <= 0:
            raise ValueError(f"Coverage end {upper} must lie above E0={E0}")
        return cls(tuple(a / span for a in alphas), upper)


# ---------------------------------------------------------------------------
# ODE propagation
# ---------------------------------------------------------------------------

Coefficient = Callable[[float], Union[float, complex]]


def _segments(start: float, end: float, breakpoints: Sequence[float]) -> List[Tuple[float, float]]:
    lo, hi = min(start, end), max(start, end)
    inner = sorted(b for b in breakpoints if lo < b < hi)
    if end < start:
        inner = inner[::-1]
    points = [start] + inner + [end]
    return list(zip(points[:-1], points[1:]))


@dataclass(frozen=True)
class Trajectory:
    """
    Sampled solution of u'' = q(x) u.

    Stored values are scaled: the true solution at x[i] is
    value[i] * exp(log_scale[i]).
    """

    x: np.ndarray
    value: np.ndarray
    derivative: np.ndarray
    log_scale: np.ndarray

    @property
    def end_value(self) -> complex:
        return complex(self.value[-1] * math.exp(self.log_scale[-1]))

    @property
    def end_derivative(self) -> complex:
        return complex(self.derivative[-1] * math.exp(self.log_scale[-1]))

    @property
    def end_log_derivative(self) -> complex:
        return complex(self.derivative[-1] / self.value[-1])

    def endpoint(self) -> Tuple[complex, complex]:
        return self.end_value, self.end_derivative


def integrate_ode(coefficient: Coefficient, init: Tuple[complex, complex], span: RealInterval,
                  tol: float = ODE_TOL, backward: bool = False,
                  breakpoints: Sequence[float] = ()) -> Trajectory:
    """
    Integrate u'' = q(x) u across `span` in value form.

    Whenever |u| or |u'| exceeds RESCALE_THRESHOLD the state is renormalized
    and the factor accumulated in the trajectory's log_scale, so exponentially
    growing Weyl solutions never overflow.

    Args:
        coefficient: q(x) = V(x) - z
        init: (u, u') at the starting end of the span
        span: Integration interval
        tol: Relative local error tolerance
        backward: Integrate from span.hi down to span.lo
        breakpoints: Points where q is discontinuous

    Returns:
        Trajectory covering the span, starting point included

    Raises:
        StepSizeUnderflowError: If the integrator cannot advance
    """
    start, end = (span.hi, span.lo) if backward else (span.lo, span.hi)
    y = np.array(init, dtype=complex)
    log_scale = 0.0

    def rhs(x, state):
        return np.array([state[1], coefficient(x) * state[0]])

    def overflow(x, state):
        return RESCALE_THRESHOLD - np.max(np.abs(state))

    overflow.terminal = True
    overflow.direction = -1

    xs, values, derivatives, scales = [start], [y[0]], [y[1]], [0.0]
    for seg_start, seg_end in _segments(start, end, breakpoints):
        x0 = seg_start
        while x0 != seg_end:
            sol = solve_ivp(rhs, (x0, seg_end), y, method="DOP853",
                            rtol=tol, atol=tol * 1e-3, events=overflow)
            if sol.status == -1:
                logger.error(f"ODE integration failed at x={x0}: {sol.message}")
                raise StepSizeUnderflowError(f"Integration stalled near x={x0}: {sol.message}")
            xs.extend(sol.t[1:])
            values.extend(sol.y[0, 1:])
            derivatives.extend(sol.y[1, 1:])
            scales.extend([log_scale] * (len(sol.t) - 1))
            y = sol.y[:, -1].copy()
            x0 = sol.t[-1]
            if sol.status == 1:
                norm = float(np.max(np.abs(y)))
                y /= norm
                log_scale += math.log(norm)
                xs.append(x0)
                values.append(y[0])
                derivatives.append(y[1])
                scales.append(log_scale)
            else:
                x0 = seg_end

    return Trajectory(np.asarray(xs, dtype=float), np.asarray(values), np.asarray(derivatives),
                      np.asarray(scales, dtype=float))


def integrate_log_derivative(coefficient: Coefficient, w0: complex, span: RealInterval,
                             tol: float = ODE_TOL, backward: bool = False,
                             breakpoints: Sequence[float] = ()) -> complex:
    """
    Propagate w = u'/u through the Riccati equation w' = q(x) - w^2.

    Only safe where u has no zeros, i.e. inside classically forbidden regions.
    """
    start, end = (span.hi, span.lo) if backward else (span.lo, span.hi)
    w = np.array([w0], dtype=complex)

    def rhs(x, state):
        return np.array([coefficient(x) - state[0] ** 2])

    for seg_start, seg_end in _segments(start, end, breakpoints):
        sol = solve_ivp(rhs, (seg_start, seg_end), w, method="DOP853", rtol=tol, atol=tol * 1e-3)
        if sol.status == -1:
            raise StepSizeUnderflowError(f"Riccati integration stalled near x={seg_start}: {sol.message}")
        w = sol.y[:, -1]
    return complex(w[0])


def fundamental_matrix(coefficient: Coefficient, span: RealInterval, tol: float = SHOOTING_TOL,
                       breakpoints: Sequence[float] = ()) -> np.ndarray:
    """Transfer matrix [[u1, u2], [u1', u2']] from span.lo to span.hi, identity at span.lo."""
    y = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex)

    def rhs(x, state):
        q = coefficient(x)
        return np.array([state[1], q * state[0], state[3], q * state[2]])

    for seg_start, seg_end in _segments(span.lo, span.hi, breakpoints):
        sol = solve_ivp(rhs, (seg_start, seg_end), y, method="DOP853", rtol=tol, atol=tol * 1e-3)
        if sol.status == -1:
            raise StepSizeUnderflowError(f"Transfer matrix integration stalled near x={seg_start}")
        y = sol.y[:, -1]
    return np.array([[y[0], y[2]], [y[1], y[3]]])


def prufer_angle(potential: Callable[[float], float], energy: float, start: float, end: float,
                 initial: float = 0.0, scale: float = 1.0, tol: float = SHOOTING_TOL,
                 breakpoints: Sequence[float] = (), method: str = "DOP853") -> float:
    """
    Scaled Prufer phase theta with u = r sin(theta), u' = S r cos(theta).

    theta' = S cos^2(theta) - ((V - E)/S) sin^2(theta). The phase passes
    multiples of pi only upward, so floor(theta/pi) counts the zeros of u.
    Integrates backward when end < start. Deep in a forbidden region the
    phase relaxes at rate 2 sqrt(V - E); pass method="LSODA" there.
    """
    theta = np.array([float(initial)])

    def rhs(x, state):
        s, c = math.sin(state[0]), math.cos(state[0])
        return [scale * c * c - (potential(x) - energy) / scale * s * s]

    for seg_start, seg_end in _segments(start, end, breakpoints):
        sol = solve_ivp(rhs, (seg_start, seg_end), theta, method=method, rtol=tol, atol=tol)
        if sol.status == -1:
            raise StepSizeUnderflowError(f"Prufer integration stalled near x={seg_start}")
        theta = sol.y[:, -1]
    return float(theta[0])


# ---------------------------------------------------------------------------
# Root finding
# ---------------------------------------------------------------------------

def find_root_bracketed(f: Callable[[float], float], bracket: RealInterval,
                        tol: float = ROOT_TOL) -> float:
    """
    Locate a root of a continuous function inside a sign-changing bracket.

    Raises:
        BracketError: If f(lo) and f(hi) have the same sign
    """
    f_lo, f_hi = f(bracket.lo), f(bracket.hi)
    if f_lo == 0:
        return bracket.lo
    if f_hi == 0:
        return bracket.hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise BracketError(
            f"No sign change on [{bracket.lo}, {bracket.hi}]: f={f_lo:.3e}, {f_hi:.3e}"
        )
    root = brentq(f, bracket.lo, bracket.hi, xtol=tol)
    return float(min(max(root, bracket.lo), bracket.hi))


# ---------------------------------------------------------------------------
# Piecewise integrands
# ---------------------------------------------------------------------------

class StepFunction:
    """
    Right-continuous piecewise-constant function.

    values[0] holds left of jumps[0], values[i] on [jumps[i-1], jumps[i]).
    Jumps closer than `merge_tol` are merged and zero-height jumps dropped.
    """

    def __init__(self, jumps: Sequence[float], values: Sequence[float], merge_tol: float = 0.0):
        jumps = np.asarray(jumps, dtype=float).ravel()
        values = np.asarray(values, dtype=float).ravel()
        if values.size != jumps.size + 1:
            raise ValueError(
                f"Step function needs len(values) == len(jumps) + 1, got {values.size} and {jumps.size}"
            )
        if jumps.size and np.any(np.diff(jumps) < 0):
            raise UnsortedJumpsError(f"Jump locations must be sorted: {jumps.tolist()}")

        kept_jumps: List[float] = []
        kept_values: List[float] = [float(values[0])]
        i, n = 0, jumps.size
        while i < n:
            j = i
            while j + 1 < n and jumps[j + 1] - jumps[j] <= merge_tol:
                j += 1
            right = float(values[j + 1])
            if abs(right - kept_values[-1]) > 1e-15:
                kept_jumps.append(float(jumps[i]))
                kept_values.append(right)
            i = j + 1
        self.jumps = np.asarray(kept_jumps, dtype=float)
        self.values = np.asarray(kept_values, dtype=float)

    def __call__(self, lam):
        idx = np.searchsorted(self.jumps, lam, side="right")
        return self.values[idx]

    def __repr__(self) -> str:
        return f"StepFunction(jumps={self.jumps.tolist()}, values={self.values.tolist()})"

    def affine(self, scale: float, offset: float) -> "StepFunction":
        """Return scale * f + offset."""
        return StepFunction(self.jumps, scale * self.values + offset)

    def shifted(self, c: float) -> "StepFunction":
        """Return lam -> f(lam - c)."""
        return StepFunction(self.jumps + c, self.values)

    def absolute(self) -> "StepFunction":
        return StepFunction(self.jumps, np.abs(self.values))

    def _pieces(self, lo: float, hi: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        inner = self.jumps[(self.jumps > lo) & (self.jumps < hi)]
        left = np.concatenate([[lo], inner])
        right = np.concatenate([inner, [hi]])
        return left, right, self(left)

    def integrate(self, lo: float, hi: float) -> float:
        """Exact integral over [lo, hi]."""
        if lo == hi:
            return 0.0
        if lo > hi:
            return -self.integrate(hi, lo)
        left, right, vals = self._pieces(lo, hi)
        if not math.isfinite(hi) and vals[-1] != 0:
            return math.copysign(math.inf, vals[-1])
        widths = np.where(vals == 0, 0.0, right - left)
        return float(np.sum(vals * widths))

    def laplace(self, alpha: float, origin: float, upper: float = math.inf) -> float:
        """Exact value of the integral of exp(-alpha (lam - origin)) f(lam) over [origin, upper]."""
        if alpha == 0:
            return self.integrate(origin, upper)
        if upper <= origin:
            return 0.0
        left, right, vals = self._pieces(origin, upper)
        a = left - origin
        b = right - origin
        weights = np.exp(-alpha * a) * (-np.expm1(-alpha * (b - a))) / alpha
        return float(np.sum(vals * weights))

    def plateaus(self, lo: float, hi: float) -> List[Tuple[float, float, float]]:
        """Finite plateaus (start, end, value) between consecutive jumps inside [lo, hi]."""
        inside = self.jumps[(self.jumps >= lo) & (self.jumps <= hi)]
        return [(float(a), float(b), float(self(a))) for a, b in zip(inside[:-1], inside[1:])]


class GridFunction:
    """Function sampled on a sorted grid, integrated by the trapezoid rule."""

    def __init__(self, lambdas: Sequence[float], values: Sequence[float]):
        self.lambdas = np.asarray(lambdas, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.lambdas.size < 2 or self.lambdas.size != self.values.size:
            raise ValueError("Grid function needs matching grids of at least 2 points")
        if np.any(np.diff(self.lambdas) <= 0):
            raise ValueError("Grid must be strictly increasing")

    def __call__(self, lam):
        return np.interp(lam, self.lambdas, self.values)

    def _clip(self, lo: float, hi: float) -> Tuple[np.ndarray, np.ndarray]:
        lo = max(lo, self.lambdas[0])
        hi = min(hi, self.lambdas[-1])
        if hi <= lo:
            return np.array([]), np.array([])
        mask = (self.lambdas > lo) & (self.lambdas < hi)
        grid = np.concatenate([[lo], self.lambdas[mask], [hi]])
        return grid, self(grid)

    def integrate(self, lo: float, hi: float) -> float:
        grid, vals = self._clip(lo, hi)
        return float(trapezoid(vals, grid)) if grid.size else 0.0

    def laplace(self, alpha: float, origin: float, upper: float = math.inf) -> float:
        grid, vals = self._clip(origin, upper)
        if not grid.size:
            return 0.0
        return float(trapezoid(np.exp(-alpha * (grid - origin)) * vals, grid))


class CallableFunction:
    """Smooth integrand given as a callable, integrated adaptively."""

    def __init__(self, func: Callable[[float], float]):
        self.func = func

    def __call__(self, lam):
        return self.func(lam)

    def integrate(self, lo: float, hi: float) -> float:
        return float(quad(self.func, lo, hi, limit=500)[0])

    def laplace(self, alpha: float, origin: float, upper: float = math.inf) -> float:
        return float(quad(lambda lam: math.exp(-alpha * (lam - origin)) * self.func(lam),
                          origin, upper, limit=500)[0])


@dataclass(frozen=True)
class AlternatingTail:
    """
    Closed-form continuation of a +/- alternating step pattern.

    The tail takes `first_value` on [start, start + h), minus that on the next
    half-period, and so on. Its Abel value is first_value * h / 2.
    """

    start: float
    first_value: float
    half_period: float

    def laplace(self, alpha: float, origin: float) -> float:
        if alpha == 0:
            return self.first_value * self.half_period / 2.0
        damping = math.exp(-alpha * (self.start - origin))
        return self.first_value * damping * math.tanh(alpha * self.half_period / 2.0) / alpha

    @classmethod
    def from_plateaus(cls, widths: Sequence[float], start: float, first_value: float) -> "AlternatingTail":
        """
        Fit the half-period to the last data plateaus.

        Widths are extrapolated separately for each parity so that slowly
        growing level spacings close with a consistent Euler-type correction.
        """
        w = [float(x) for x in widths]
        if len(w) >= 4:
            a0 = 2.0 * w[-2] - w[-4]
            a1 = 2.0 * w[-1] - w[-3]
            h = a0 - 0.5 * (a1 - a0)
        elif len(w) >= 2:
            h = 0.5 * (w[-1] + w[-2])
        elif w:
            h = w[-1]
        else:
            raise ValueError("Need at least one plateau to close an alternating tail")
        if h <= 0:
            h = float(np.mean(w[-2:]))
        return cls(start, first_value, h)


def as_integrand(integrand):
    """Wrap a plain callable so it exposes integrate/laplace."""
    if hasattr(integrand, "laplace"):
        return integrand
    return CallableFunction(integrand)


def integrate_piecewise_constant(jumps: Sequence[float], values: Sequence[float],
                                 interval: RealInterval) -> float:
    """
    Exact integral of a step function over an interval.

    Raises:
        UnsortedJumpsError: If jumps are not sorted
    """
    return StepFunction(jumps, values).integrate(interval.lo, interval.hi)


# ---------------------------------------------------------------------------
# Abelian extrapolation
# ---------------------------------------------------------------------------

def richardson_limit(alphas: Sequence[float], values: Sequence[float]) -> float:
    """Constant term of the polynomial through (alpha_i, I_i), degree len - 1."""
    mat = np.vander(np.asarray(alphas, dtype=float), len(alphas), increasing=True)
    coeffs = np.linalg.solve(mat, np.asarray(values, dtype=float))
    return float(coeffs[0])


@dataclass(frozen=True)
class AbelResult:
    """Outcome of an Abel-regularized integral."""

    value: float
    alphas: Tuple[float, ...]
    integrals: Tuple[float, ...]
    estimates: Tuple[float, ...]
    converged: bool

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "alphas": list(self.alphas),
            "integrals": list(self.integrals),
            "estimates": list(self.estimates),
            "converged": self.converged,
        }


def abel_limit(integrand, E0: float, schedule: Optional[AbelSchedule] = None,
               tail: Optional[AlternatingTail] = None, tol: float = 1e-9) -> AbelResult:
    """
    Abel-regularized integral lim_{alpha->0} of exp(-alpha (lam - E0)) g(lam) over [E0, cutoff].

    I(alpha) is evaluated on every rate of the schedule and extrapolated with a
    quadratic fit on each consecutive triple; the last triple gives the value.

    Args:
        integrand: StepFunction, GridFunction, or a plain callable g(lam)
        E0: Lower integration limit
        schedule: Damping rates and cutoff (default schedule if omitted)
        tail: Closed-form continuation added beyond the cutoff

    Returns:
        AbelResult with the raw I(alpha) sequence; `converged` is False when
        successive extrapolations drift apart instead of settling
    """
    schedule = schedule or AbelSchedule.default(E0)
    f = as_integrand(integrand)

    integrals = []
    for alpha in schedule.alphas:
        value = f.laplace(alpha, E0, schedule.cutoff)
        if tail is not None:
            value += tail.laplace(alpha, E0)
        integrals.append(value)

    alphas = schedule.alphas
    estimates = [richardson_limit(alphas[i:i + 3], integrals[i:i + 3]) for i in range(len(alphas) - 2)]
    value = estimates[-1]
    diffs = np.abs(np.diff(estimates))
    converged = bool(diffs.size < 2 or diffs[-1] <= diffs[-2] + tol * max(1.0, abs(value)))
    if not converged:
        logger.warning(f"Abel extrapolation did not settle: estimates={estimates}")
    return AbelResult(value, tuple(alphas), tuple(integrals), tuple(estimates), converged)
