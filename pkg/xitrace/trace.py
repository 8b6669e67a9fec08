"""
Trace formulas recovering the potential from xi.

V(x) = E0 + Abel-lim of the integral of exp(-alpha (lam - E0)) (1 - 2 xi(x, lam)),
its periodic gap-sum form, the eigenvalue-sum form for confining potentials,
and the summability diagnostic for the integral of |xi - 1/2|.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid

from xitrace.config import ABEL_MIN_PAIRS, DEFAULT_ABEL_ALPHAS, INTERLACING_TOL
from xitrace.errors import CoverageError, InterlacingError
from xitrace.numerics import AbelResult, AbelSchedule, AlternatingTail, abel_limit
from xitrace.periodic import BandStructure
from xitrace.schrodinger import xi_confining
from xitrace.spectral import XiGrid

logger = logging.getLogger(__name__)

_HALF_TOL = 0.05
_AGREEMENT_TOL = 1e-3
# gaps at the top of the data that set the periodic tail bound
_TAIL_GAPS = 3


@dataclass(frozen=True)
class TraceResult:
    """
    Reconstructed potential value with its diagnostics.

    Attributes:
        value: Reconstructed V(x)
        E0: Lower limit of the spectral integral
        abel: Raw I(alpha) sequence and extrapolations
        tail: How the data was continued beyond its coverage
        exact_integral: Closed-form alpha = 0 value where one exists
        summable: The integral of |xi - 1/2| plateaus over the covered range
        low_confidence: Too few oscillation pairs, unsettled extrapolation,
            or disagreement between the closed form and the extrapolation
        pairs: Complete (1, 0) plateau pairs in the data
    """

    value: float
    E0: float
    abel: AbelResult
    tail: str
    exact_integral: Optional[float] = None
    summable: bool = False
    low_confidence: bool = False
    pairs: int = 0
    coverage: Tuple[float, float] = (-math.inf, math.inf)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "E0": self.E0,
            "tail": self.tail,
            "exact_integral": self.exact_integral,
            "summable": self.summable,
            "low_confidence": self.low_confidence,
            "pairs": self.pairs,
            "coverage": list(self.coverage),
            "abel": self.abel.to_dict(),
        }


@dataclass(frozen=True)
class SummabilityProfile:
    """Cumulative integral of |xi - 1/2| from E0 up to each lambda."""

    lambdas: np.ndarray
    cumulative: np.ndarray
    plateau: bool

    def to_records(self) -> List[dict]:
        return [{"lambda": float(l), "cumulative": float(c)} for l, c in zip(self.lambdas, self.cumulative)]


@dataclass(frozen=True)
class PeriodicTraceResult:
    """Gap-sum reconstruction E_0 + sum of (E_{2n} + E_{2n-1} - 2 mu_n)."""

    value: float
    E0: float
    terms: Tuple[float, ...]
    partial_sums: Tuple[float, ...]
    tail_bound: float
    x: float = 0.0

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "E0": self.E0,
            "x": self.x,
            "terms": list(self.terms),
            "partial_sums": list(self.partial_sums),
            "tail_bound": self.tail_bound,
        }


# ---------------------------------------------------------------------------
# Tail handling
# ---------------------------------------------------------------------------

def _last_value(xi: XiGrid) -> float:
    return float(xi.values[-1])


def _xi_plateaus(xi: XiGrid, E0: float) -> List[Tuple[float, float, float]]:
    return xi.step_function().plateaus(E0, xi.coverage[1])


def _detect_tail(xi: XiGrid, E0: float) -> str:
    upper = xi.coverage[1]
    if math.isinf(upper):
        return "none"
    if xi.is_piecewise:
        plateaus = _xi_plateaus(xi, E0)
        if len(plateaus) >= 2:
            a, b = plateaus[-2][2], plateaus[-1][2]
            if {a, b} == {0.0, 1.0}:
                return "alternating"
        inside = xi(upper - 1e-12 * max(1.0, abs(upper)))
        if abs(float(inside) - 0.5) < _HALF_TOL:
            return "zero"
        raise CoverageError(f"xi ends at {upper} without a recognizable continuation")
    if abs(_last_value(xi) - 0.5) < _HALF_TOL:
        return "zero"
    raise CoverageError(f"Grid xi ends at {upper} with xi={_last_value(xi):.3f}, not near 1/2")


def _alternating_tail(xi: XiGrid, E0: float) -> Tuple[AlternatingTail, int]:
    plateaus = _xi_plateaus(xi, E0)
    widths = [hi - lo for lo, hi, _ in plateaus]
    last_integrand = 1.0 - 2.0 * plateaus[-1][2]
    tail = AlternatingTail.from_plateaus(widths, xi.coverage[1], -last_integrand)
    return tail, len(plateaus) // 2


def reconstruct_V(xi: XiGrid, E0: float, schedule: Optional[AbelSchedule] = None,
                  tail: str = "auto") -> TraceResult:
    """
    V(x) = E0 + Abel limit of the integral of (1 - 2 xi(x, lam)) over [E0, infinity).

    Data that stops short of infinity is continued by a zero integrand (xi
    ending on a band, xi near 1/2) or by the closed-form alternating
    pattern of confining potentials. In those cases the alpha = 0 value is
    available in closed form and the extrapolated I(alpha) sequence serves as
    a cross-check; with tail "none" the extrapolated value is used and xi
    must cover the schedule's cutoff.

    Args:
        xi: xi(x, .) at the point of interest
        E0: Lower limit, at or below inf spec(H)
        schedule: Abel schedule; chosen from the tail mode if omitted
        tail: "auto", "alternating", "zero" or "none"

    Returns:
        TraceResult with the value and I(alpha) diagnostics

    Raises:
        CoverageError: If xi does not cover what the chosen mode needs
    """
    lo, hi = xi.coverage
    if lo > E0 + 1e-12 * max(1.0, abs(E0)):
        raise CoverageError(f"xi starts at {lo}, above E0={E0}")
    if tail not in ("auto", "alternating", "zero", "none"):
        raise ValueError(f"Unknown tail mode '{tail}'")
    mode = _detect_tail(xi, E0) if tail == "auto" else tail

    integrand = xi.integrand()
    continuation = None
    pairs = 0
    exact = None

    if mode == "none":
        schedule = schedule or AbelSchedule.default(E0)
        if hi < schedule.cutoff:
            raise CoverageError(f"xi covers up to {hi}, schedule needs {schedule.cutoff}")
        if math.isinf(hi) and abs(_last_value(xi) - 0.5) < 1e-12:
            exact = integrand.integrate(E0, hi)
    elif mode == "zero":
        if math.isinf(hi):
            raise CoverageError("Zero continuation needs finite coverage")
        schedule = schedule or AbelSchedule.for_coverage(E0, hi)
        exact = integrand.integrate(E0, hi)
    else:
        if not xi.is_piecewise or math.isinf(hi):
            raise CoverageError("Alternating continuation needs piecewise xi with finite coverage")
        continuation, pairs = _alternating_tail(xi, E0)
        schedule = schedule or AbelSchedule(DEFAULT_ABEL_ALPHAS, hi)
        exact = integrand.integrate(E0, hi) + continuation.laplace(0.0, E0)

    abel = abel_limit(integrand, E0, schedule, continuation)
    integral = exact if exact is not None else abel.value
    low_confidence = not abel.converged
    if mode == "alternating" and pairs < ABEL_MIN_PAIRS:
        logger.warning(f"Only {pairs} oscillation pairs beyond E0; result is low confidence")
        low_confidence = True
    if exact is not None and abs(abel.value - exact) > _AGREEMENT_TOL * max(1.0, abs(exact)):
        logger.warning(f"Abel extrapolation {abel.value:.8g} disagrees with closed form {exact:.8g}")
        low_confidence = True

    profile = summability_profile(xi, E0)
    result = TraceResult(
        value=float(E0 + integral),
        E0=float(E0),
        abel=abel,
        tail=mode,
        exact_integral=None if exact is None else float(exact),
        summable=profile.plateau,
        low_confidence=low_confidence,
        pairs=pairs,
        coverage=(float(lo), float(hi)),
    )
    logger.info(f"Trace reconstruction at x={xi.base_point}: V={result.value:.10g} (tail={mode})")
    return result


# ---------------------------------------------------------------------------
# Periodic and eigenvalue forms
# ---------------------------------------------------------------------------

def reconstruct_V_periodic(E_edges: Union[BandStructure, Sequence[float]], mu: Sequence[float],
                           x: float = 0.0, tol: float = INTERLACING_TOL) -> PeriodicTraceResult:
    """
    V(x) = E_0 + sum over gaps of (E_{2n} + E_{2n-1} - 2 mu_n(x)).

    Each term is bounded by its gap length; the tail bound is the largest of
    the last few available gaps plus the accumulated edge tolerance.

    Raises:
        InterlacingError: If some mu_n lies outside [E_{2n-1}, E_{2n}]
    """
    edges = list(E_edges.edges) if isinstance(E_edges, BandStructure) else [float(e) for e in E_edges]
    if not edges:
        raise ValueError("Need at least E_0")
    n_gaps = min(len(mu), (len(edges) - 1) // 2)
    terms: List[float] = []
    sums = [edges[0]]
    for n in range(1, n_gaps + 1):
        lo, hi, m = edges[2 * n - 1], edges[2 * n], float(mu[n - 1])
        if m < lo - tol or m > hi + tol:
            raise InterlacingError(f"mu_{n}={m:.12g} outside gap [{lo:.12g}, {hi:.12g}]")
        terms.append(hi + lo - 2.0 * m)
        sums.append(sums[-1] + terms[-1])
    top_gaps = [edges[2 * n] - edges[2 * n - 1] for n in range(max(1, n_gaps - _TAIL_GAPS + 1), n_gaps + 1)]
    tail_bound = max(top_gaps, default=0.0) + 3.0 * n_gaps * tol
    return PeriodicTraceResult(sums[-1], edges[0], tuple(terms), tuple(sums), tail_bound, float(x))


class _EigenvalueSum:
    """
    Laplace transform of 1 - 2 xi with xi = #{E_n <= lam} - #{mu_n <= lam}, summed term by term.

    Truncated at `upper`, each step contributes (exp(-alpha (a - E0)) - exp(-alpha (upper - E0))) / alpha.
    """

    def __init__(self, E: np.ndarray, mu: np.ndarray):
        self.E = E
        self.mu = mu

    def laplace(self, alpha: float, origin: float, upper: float = math.inf) -> float:
        S = upper - origin
        edge = math.exp(-alpha * S) if math.isfinite(S) else 0.0

        def terms(points):
            return float(np.sum(np.exp(-alpha * (points - origin)) - edge))

        return ((1.0 - edge) - 2.0 * terms(self.E) + 2.0 * terms(self.mu)) / alpha


def reconstruct_V_from_eigenvalues(E_list: Sequence[float], mu_list: Sequence[float],
                                   E0: Optional[float] = None,
                                   schedule: Optional[AbelSchedule] = None) -> TraceResult:
    """
    Eigenvalue-sum form for confining potentials.

    I(alpha) = alpha^-1 [1 - 2 sum exp(-alpha (E_n - E0)) + 2 sum exp(-alpha (mu_n - E0))]
    over the data, continued past E_{N-1} by the alternating closed form, then
    extrapolated to alpha -> 0.
    """
    E = np.sort(np.asarray(E_list, dtype=float))
    mu = np.sort(np.asarray(mu_list, dtype=float))[:E.size - 1]
    E0 = float(E[0]) if E0 is None else float(E0)
    xi = xi_confining(None, 0.0, E, mu)
    continuation, pairs = _alternating_tail(xi, E0)
    upper = float(E[-1])
    schedule = schedule or AbelSchedule(DEFAULT_ABEL_ALPHAS, upper)
    abel = abel_limit(_EigenvalueSum(E, mu), E0, schedule, continuation)
    low_confidence = not abel.converged or pairs < ABEL_MIN_PAIRS
    return TraceResult(float(E0 + abel.value), E0, abel, "alternating", None, False,
                       low_confidence, pairs, (-math.inf, upper))


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------

def summability_profile(xi: XiGrid, E0: float, upper: Optional[float] = None) -> SummabilityProfile:
    """
    Cumulative integral of |xi - 1/2| from E0, nondecreasing in the upper limit.

    `plateau` is set when the last quarter of the range adds at most 5% of
    the total, the signature of the absolutely summable regime.
    """
    hi = xi.coverage[1] if upper is None else upper
    if xi.is_piecewise:
        deviation = xi.step_function().affine(1.0, -0.5).absolute()
        if math.isinf(hi):
            inner = xi.jumps[xi.jumps > E0]
            hi = float(inner[-1] + max(inner[-1] - E0, 1.0)) if inner.size else E0 + 1.0
        inner = xi.jumps[(xi.jumps > E0) & (xi.jumps < hi)]
        lambdas = np.concatenate([[E0], inner, [hi]]) if hi > E0 else np.array([E0])
        cumulative = np.array([deviation.integrate(E0, lam) for lam in lambdas])
    else:
        mask = (xi.lambdas >= E0) & (xi.lambdas <= hi)
        lambdas = xi.lambdas[mask]
        if lambdas.size < 2:
            return SummabilityProfile(lambdas, np.zeros(lambdas.size), True)
        cumulative = cumulative_trapezoid(np.abs(xi.values[mask] - 0.5), lambdas, initial=0.0)

    total = float(cumulative[-1]) if cumulative.size else 0.0
    if total <= 1e-12:
        plateau = True
    else:
        start = lambdas[0] + 0.75 * (lambdas[-1] - lambdas[0])
        at_start = float(np.interp(start, lambdas, cumulative))
        plateau = (total - at_start) <= 0.05 * total
    return SummabilityProfile(lambdas, cumulative, bool(plateau))


def absolutely_continuous_set(xi: XiGrid, tol: float = 1e-9, min_width: float = 1e-9) -> List[Tuple[float, float]]:
    """
    Intervals where 0 < xi < 1, with sub-`min_width` pieces discarded.

    Up to a null set this is the essential support of the absolutely
    continuous spectrum.
    """
    intervals: List[Tuple[float, float]] = []
    if xi.is_piecewise:
        edges = np.concatenate([[-math.inf], xi.jumps, [math.inf]])
        for lo, hi, value in zip(edges[:-1], edges[1:], xi.values):
            lo, hi = max(lo, xi.coverage[0]), min(hi, xi.coverage[1])
            if hi > lo and tol < value < 1.0 - tol:
                if intervals and intervals[-1][1] == lo:
                    intervals[-1] = (intervals[-1][0], float(hi))
                else:
                    intervals.append((float(lo), float(hi)))
    else:
        inside = (xi.values > tol) & (xi.values < 1.0 - tol)
        start = None
        for i, flag in enumerate(inside):
            if flag and start is None:
                start = i
            if (not flag or i == inside.size - 1) and start is not None:
                end = i if flag else i - 1
                intervals.append((float(xi.lambdas[start]), float(xi.lambdas[end])))
                start = None
    return [(a, b) for a, b in intervals if b - a >= min_width]
