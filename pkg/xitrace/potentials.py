"""
Potential descriptors for the continuum operator -d^2/dx^2 + V(x).

Built-in analytic forms, sampled data with cubic interpolation, and periodic
wrappers. Every potential carries the metadata the solvers need to choose
boundary treatment: a lower bound, breakpoints, an optional radius beyond
which V is flat, confinement, and period.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from xitrace.config import EVENNESS_TOL, NEGLIGIBLE_POTENTIAL

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Potential:
    """
    A real potential V(x), continuous or piecewise continuous, bounded below.

    Attributes:
        name: Builtin name or "sampled"/"periodic"
        func: Vectorized callable x -> V(x)
        lower_bound: inf V
        kind: "builtin", "sampled" or "periodic"
        params: Parameters the potential was built from
        breakpoints: Discontinuities of V
        flat_beyond: R such that V is constant on x > R and on x < -R
        confining: V(x) -> infinity as |x| -> infinity
        period: Period L for periodic potentials
    """

    name: str
    func: Callable
    lower_bound: float
    kind: str = "builtin"
    params: Dict[str, float] = field(default_factory=dict)
    breakpoints: Tuple[float, ...] = ()
    flat_beyond: Optional[float] = None
    confining: bool = False
    period: Optional[float] = None

    def __call__(self, x):
        return self.func(x)

    @property
    def is_periodic(self) -> bool:
        return self.period is not None

    @property
    def is_short_range(self) -> bool:
        """Flat beyond a finite radius with zero exterior on both sides."""
        if self.flat_beyond is None:
            return False
        R = self.flat_beyond
        return abs(float(self(R + 1.0))) <= NEGLIGIBLE_POTENTIAL and abs(float(self(-R - 1.0))) <= NEGLIGIBLE_POTENTIAL

    def turning_radius(self, energy: float) -> float:
        """Smallest tested R >= 1 with V(+-R) > energy (confining potentials only)."""
        if not self.confining:
            raise ValueError(f"Potential '{self.name}' is not confining")
        R = 1.0
        while float(self(R)) <= energy or float(self(-R)) <= energy:
            R *= 1.1
            if R > 1e6:
                raise ValueError(f"No turning point found for energy {energy}")
        return R

    def is_even(self, radius: float = 10.0, samples: int = 401, tol: float = EVENNESS_TOL) -> bool:
        xs = np.linspace(0.0, radius, samples)
        right = np.asarray(self(xs), dtype=float)
        left = np.asarray(self(-xs), dtype=float)
        scale = max(1.0, float(np.max(np.abs(right))))
        return bool(np.max(np.abs(right - left)) <= tol * scale)

    def shifted(self, c: float) -> "Potential":
        base = self.func
        params = dict(self.params)
        params["shift"] = params.get("shift", 0.0) + c
        return Potential(self.name, lambda x: base(x) + c, self.lower_bound + c, self.kind, params,
                         self.breakpoints, self.flat_beyond, self.confining, self.period)

    def describe(self) -> dict:
        return {"name": self.name, "kind": self.kind, "params": dict(self.params)}


def _radius_for_decay(amplitude: float, rate: float) -> float:
    """R with amplitude * exp(-rate R) below the negligible level."""
    if amplitude <= NEGLIGIBLE_POTENTIAL:
        return 0.0
    return math.log(amplitude / NEGLIGIBLE_POTENTIAL) / rate


def zero() -> Potential:
    return Potential("zero", lambda x: 0.0 * x, 0.0, flat_beyond=0.0)


def constant(c: float) -> Potential:
    return Potential("constant", lambda x: 0.0 * x + c, c, params={"c": c}, flat_beyond=0.0)


def harmonic(a: float = 1.0, b: float = 0.0) -> Potential:
    """a x^2 + b."""
    if a <= 0:
        raise ValueError(f"Harmonic potential needs a > 0, got {a}")
    return Potential("harmonic", lambda x: a * x * x + b, b, params={"a": a, "b": b}, confining=True)


def quartic(a: float = 1.0, b: float = 0.0) -> Potential:
    """a x^4 + b."""
    if a <= 0:
        raise ValueError(f"Quartic potential needs a > 0, got {a}")
    return Potential("quartic", lambda x: a * x ** 4 + b, b, params={"a": a, "b": b}, confining=True)


def mathieu(A: float = 1.0) -> Potential:
    """A cos(x), period 2 pi."""
    return Potential("mathieu", lambda x: A * np.cos(x), -abs(A), params={"A": A}, period=2.0 * math.pi)


def square_well(depth: float, width: float) -> Potential:
    """-depth on |x| <= width/2, zero outside. Negative depth gives a barrier."""
    if width <= 0:
        raise ValueError(f"Square well width must be positive, got {width}")
    half = width / 2.0
    return Potential(
        "square_well",
        lambda x: np.where(np.abs(x) <= half, -depth, 0.0),
        min(-depth, 0.0),
        params={"depth": depth, "width": width},
        breakpoints=(-half, half),
        flat_beyond=half,
    )


def poschl_teller(l: float = 1.0) -> Potential:
    """-l(l+1) sech^2(x); reflectionless for integer l."""
    strength = l * (l + 1.0)
    return Potential(
        "poschl_teller",
        lambda x: -strength / np.cosh(x) ** 2,
        -strength,
        params={"l": l},
        flat_beyond=_radius_for_decay(4.0 * strength, 2.0),
    )


def gaussian(A: float, s: float = 1.0) -> Potential:
    """A exp(-x^2 / (2 s^2))."""
    radius = s * math.sqrt(2.0 * math.log(abs(A) / NEGLIGIBLE_POTENTIAL)) if abs(A) > NEGLIGIBLE_POTENTIAL else 0.0
    return Potential(
        "gaussian",
        lambda x: A * np.exp(-x * x / (2.0 * s * s)),
        min(A, 0.0),
        params={"A": A, "s": s},
        flat_beyond=radius,
    )


def sampled(xs: Sequence[float], values: Sequence[float]) -> Potential:
    """
    Cubic interpolation of sampled data, extended by the end values.

    Raises:
        ValueError: If the grid is not strictly increasing or too short
    """
    xs = np.asarray(xs, dtype=float)
    values = np.asarray(values, dtype=float)
    if xs.size < 4 or xs.size != values.size:
        raise ValueError("Sampled potential needs at least 4 matching (x, V) pairs")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("Sampled potential x values must be strictly increasing")
    spline = CubicSpline(xs, values)
    lo, hi = xs[0], xs[-1]

    def func(x):
        return np.where(x < lo, values[0], np.where(x > hi, values[-1], spline(np.clip(x, lo, hi))))

    return Potential(
        "sampled",
        func,
        float(min(values.min(), spline(np.linspace(lo, hi, 20 * xs.size)).min())),
        kind="sampled",
        params={"x_min": float(lo), "x_max": float(hi), "points": int(xs.size)},
        flat_beyond=float(max(abs(lo), abs(hi))),
    )


def periodic(base: Potential, period: float) -> Potential:
    """Repeat base on [0, period) with the given period."""
    if period <= 0:
        raise ValueError(f"Period must be positive, got {period}")
    params = dict(base.params)
    params["period"] = period
    return Potential(
        base.name,
        lambda x: base.func(np.mod(x, period)),
        base.lower_bound,
        kind="periodic",
        params=params,
        period=period,
    )


BUILTINS: Dict[str, Callable[..., Potential]] = {
    "zero": zero,
    "constant": constant,
    "harmonic": harmonic,
    "quartic": quartic,
    "mathieu": mathieu,
    "square_well": square_well,
    "poschl_teller": poschl_teller,
    "gaussian": gaussian,
}
