"""
Value types shared by the operator modules: xi on a grid or as a step
function, boundary values of the diagonal Green's function, and spectral
data containers.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from xitrace.numerics import GridFunction, StepFunction

logger = logging.getLogger(__name__)

_VALUE_TOL = 1e-9


@dataclass(frozen=True)
class GreensValue:
    """
    Diagonal Green's function G(x, x; z).

    `value` uses the normalization in which the free operator gives
    (-z)^(-1/2); `kernel` is the resolvent integral kernel itself.
    """

    z: complex
    value: complex
    continuum: bool = True

    @property
    def kernel(self) -> complex:
        return self.value / 2.0 if self.continuum else self.value

    @property
    def phase(self) -> float:
        """Arg G / pi in [0, 1]."""
        return min(max(np.angle(self.value) / math.pi, 0.0), 1.0)

    def is_herglotz(self) -> bool:
        return self.value.imag > 0 if self.z.imag > 0 else True


@dataclass(frozen=True)
class XiPoint:
    """xi at a single energy, extrapolated from a decreasing eps schedule."""

    lam: float
    value: float
    uncertainty: float
    converged: bool
    phases: Tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "xi": self.value,
            "uncertainty": self.uncertainty,
            "converged": self.converged,
        }


def extrapolate_phase(lam: float, eps_schedule: Sequence[float], phases: Sequence[float]) -> XiPoint:
    """
    Linear eps -> 0 extrapolation of Arg G / pi from the last two schedule points.

    Non-monotone decay of successive differences marks a jump point; the value
    is still reported, clamped to [0, 1], with `converged` set to False.
    """
    eps = np.asarray(eps_schedule, dtype=float)
    ph = np.asarray(phases, dtype=float)
    if ph.size == 1:
        return XiPoint(lam, float(np.clip(ph[0], 0, 1)), 1.0, False, tuple(ph))

    slope = (ph[-2] - ph[-1]) / (eps[-2] - eps[-1])
    value = ph[-1] - slope * eps[-1]
    diffs = np.abs(np.diff(ph))
    uncertainty = abs(value - ph[-1]) + (diffs[-1] if diffs.size else 0.0) * eps[-1] / eps[-2]
    converged = True
    if diffs.size >= 2:
        converged = bool(diffs[-1] <= diffs[-2] + 1e-9 or diffs[-1] < 1e-6)
    clamped = float(min(max(value, 0.0), 1.0))
    return XiPoint(lam, clamped, float(uncertainty), converged, tuple(ph))


@dataclass(frozen=True, eq=False)
class XiGrid:
    """
    xi(x, .) either sampled on a grid or held exactly as a step function.

    Attributes:
        base_point: x (continuum) or n (Jacobi)
        lambdas: Grid points, or jump locations for the piecewise form
        values: Values on the grid, or plateau values (one more than jumps)
        representation: "grid" or "piecewise"
        coverage: Energy range on which the data is trusted
        flags: Per-point convergence flags for grid data
    """

    base_point: float
    lambdas: np.ndarray
    values: np.ndarray
    representation: str = "grid"
    coverage: Tuple[float, float] = (-math.inf, math.inf)
    flags: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        lambdas = np.asarray(self.lambdas, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if np.any(values < -_VALUE_TOL) or np.any(values > 1 + _VALUE_TOL):
            raise ValueError(f"xi values must lie in [0, 1], got range [{values.min()}, {values.max()}]")
        values = np.clip(values, 0.0, 1.0)
        if self.representation == "grid":
            if lambdas.size < 2 or lambdas.size != values.size:
                raise ValueError("Grid xi needs matching lambda/value arrays of at least 2 points")
            if np.any(np.diff(lambdas) <= 0):
                raise ValueError("Grid xi lambdas must be strictly increasing")
            coverage = (float(lambdas[0]), float(lambdas[-1]))
        elif self.representation == "piecewise":
            if values.size != lambdas.size + 1:
                raise ValueError("Piecewise xi needs one more plateau value than jumps")
            coverage = tuple(float(c) for c in self.coverage)
        else:
            raise ValueError(f"Unknown xi representation: {self.representation}")
        object.__setattr__(self, "lambdas", lambdas)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "coverage", coverage)

    @classmethod
    def piecewise(cls, base_point: float, step: StepFunction,
                  coverage: Tuple[float, float] = (-math.inf, math.inf)) -> "XiGrid":
        return cls(base_point, step.jumps, step.values, "piecewise", coverage)

    @classmethod
    def grid(cls, base_point: float, lambdas: Sequence[float], values: Sequence[float],
             flags: Optional[Sequence[bool]] = None) -> "XiGrid":
        return cls(base_point, np.asarray(lambdas), np.asarray(values), "grid",
                   flags=None if flags is None else np.asarray(flags, dtype=bool))

    @property
    def is_piecewise(self) -> bool:
        return self.representation == "piecewise"

    @property
    def jumps(self) -> np.ndarray:
        return self.lambdas if self.is_piecewise else np.array([])

    def step_function(self) -> StepFunction:
        if not self.is_piecewise:
            raise ValueError("Grid xi has no exact step representation")
        return StepFunction(self.lambdas, self.values)

    def function(self):
        """xi as an integrable function object."""
        if self.is_piecewise:
            return self.step_function()
        return GridFunction(self.lambdas, self.values)

    def integrand(self):
        """The trace-formula integrand 1 - 2 xi."""
        if self.is_piecewise:
            return self.step_function().affine(-2.0, 1.0)
        return GridFunction(self.lambdas, 1.0 - 2.0 * self.values)

    def __call__(self, lam):
        return self.function()(lam)

    def covers(self, lo: float, hi: float, tol: float = 1e-12) -> bool:
        return self.coverage[0] <= lo + tol and self.coverage[1] >= hi - tol

    def low_confidence(self, lam):
        """
        True where the value at lam is not backed by the data: outside the
        coverage, or next to an unconverged grid point.
        """
        lam_arr = np.asarray(lam, dtype=float)
        outside = (lam_arr < self.coverage[0]) | (lam_arr > self.coverage[1])
        if not self.is_piecewise and self.flags is not None:
            idx = np.clip(np.searchsorted(self.lambdas, lam_arr), 1, self.lambdas.size - 1)
            outside = outside | ~(self.flags[idx - 1] & self.flags[idx])
        return bool(outside) if outside.ndim == 0 else outside

    def shifted(self, c: float) -> "XiGrid":
        """xi'(lam) = xi(lam - c)."""
        cov = (self.coverage[0] + c, self.coverage[1] + c)
        return XiGrid(self.base_point, self.lambdas + c, self.values, self.representation,
                      cov if self.is_piecewise else self.coverage, self.flags)

    def to_records(self) -> List[Dict[str, float]]:
        """Rows for tabular output."""
        if self.is_piecewise:
            edges = np.concatenate([[-math.inf], self.lambdas, [math.inf]])
            rows = []
            for lo, hi, value in zip(edges[:-1], edges[1:], self.values):
                lo, hi = max(lo, self.coverage[0]), min(hi, self.coverage[1])
                if hi > lo:
                    rows.append({"lambda_lo": float(lo), "lambda_hi": float(hi), "xi": float(value)})
            return rows
        flags = self.flags if self.flags is not None else np.ones(self.lambdas.size, dtype=bool)
        return [
            {"lambda": float(lam), "xi": float(val), "converged": bool(flag)}
            for lam, val, flag in zip(self.lambdas, self.values, flags)
        ]


@dataclass
class SpectralData:
    """Spectral information gathered for a single run."""

    eigenvalues: List[float] = field(default_factory=list)
    dirichlet: List[float] = field(default_factory=list)
    band_edges: List[float] = field(default_factory=list)
    essential: List[Tuple[float, float]] = field(default_factory=list)
    reflection: Dict[float, complex] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "eigenvalues": list(self.eigenvalues),
            "dirichlet": list(self.dirichlet),
            "band_edges": list(self.band_edges),
            "essential": [list(iv) for iv in self.essential],
            "reflection": {str(k): [v.real, v.imag] for k, v in self.reflection.items()},
        }
