"""
Scattering theory for short-range potentials.

Jost solutions f_+(x, lam) ~ exp(ik x) at +infinity and f_-(x, lam) ~ exp(-ik x)
at -infinity, reflection and transmission coefficients from their Wronskians,
and xi(x, lam) = 1/2 + arg(1 + R f_+^2 / |f_+|^2) / pi for lam > 0.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import quad

from xitrace.config import SHORT_RANGE_TOL, WRONSKIAN_TOL
from xitrace.errors import ShortRangeError, WronskianError
from xitrace.numerics import RealInterval, integrate_ode
from xitrace.potentials import Potential

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScatteringData:
    """
    Scattering quantities at energy lam = k^2 > 0.

    R is the right-incidence reflection coefficient: T f_- = conj(f_+) + R f_+,
    so T f_-(x) ~ exp(-ikx) + R exp(ikx) as x -> +infinity.
    """

    lam: float
    k: float
    R: complex
    T: complex
    R_left: complex
    x: float
    f_plus_at_x: complex
    f_minus_at_x: complex

    @property
    def unitarity_defect(self) -> float:
        return abs(abs(self.R) ** 2 + abs(self.T) ** 2 - 1.0)

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "k": self.k,
            "R_abs": abs(self.R),
            "R_arg": float(np.angle(self.R)),
            "T_abs": abs(self.T),
            "R_left_abs": abs(self.R_left),
            "unitarity_defect": self.unitarity_defect,
        }


def wronskian(f: Tuple[complex, complex], g: Tuple[complex, complex]) -> complex:
    """W(f, g) = f g' - f' g."""
    return f[0] * g[1] - f[1] * g[0]


def scattering_radius(V: Potential, cutoff: Optional[float] = None) -> float:
    """
    Radius beyond which V is treated as zero.

    Raises:
        ShortRangeError: If the integral of |V| beyond the radius exceeds SHORT_RANGE_TOL
    """
    R = cutoff if cutoff is not None else V.flat_beyond
    if R is None:
        raise ShortRangeError(f"Potential '{V.name}' has no flat exterior; pass a scattering cutoff")
    R = float(R)
    right = quad(lambda x: abs(float(V(x))), R, math.inf, limit=200)[0]
    left = quad(lambda x: abs(float(V(x))), -math.inf, -R, limit=200)[0]
    if not (right + left < SHORT_RANGE_TOL):
        raise ShortRangeError(
            f"Potential '{V.name}' is not negligible beyond |x| = {R}: tail integral {right + left:.3e}"
        )
    return R


def jost_solution(V: Potential, lam: float, side: str, x: float,
                  cutoff: Optional[float] = None) -> Tuple[complex, complex]:
    """
    (f(x), f'(x)) for the Jost solution f_+ (side "plus") or f_- (side "minus").

    Raises:
        ValueError: If lam <= 0
        ShortRangeError: If V is not negligible beyond the cutoff
    """
    if lam <= 0:
        raise ValueError(f"Jost solutions need lam > 0, got {lam}")
    if side not in ("plus", "minus"):
        raise ValueError(f"side must be 'plus' or 'minus', got '{side}'")
    R = scattering_radius(V, cutoff)
    k = math.sqrt(lam)
    sign = 1.0 if side == "plus" else -1.0

    X = max(R, x) if side == "plus" else min(-R, x)
    phase = np.exp(1j * sign * k * X)
    start = (complex(phase), complex(1j * sign * k * phase))
    if X == x:
        return start

    span = RealInterval(min(X, x), max(X, x))
    traj = integrate_ode(lambda s: float(V(s)) - lam, start, span, backward=side == "plus",
                         breakpoints=V.breakpoints)
    return traj.endpoint()


def reflection_coefficient(V: Potential, lam: float, x: float = 0.0,
                           cutoff: Optional[float] = None) -> ScatteringData:
    """
    R, T and R_left at energy lam from Wronskians of the Jost solutions at x.

    T = 2ik / W(f_-, f_+), R = -W(f_-, conj f_+) / W(f_-, f_+),
    R_left = -W(conj f_-, f_+) / W(f_-, f_+).

    Raises:
        WronskianError: If W(f_-, f_+) vanishes numerically
    """
    k = math.sqrt(lam)
    f_plus = jost_solution(V, lam, "plus", x, cutoff)
    f_minus = jost_solution(V, lam, "minus", x, cutoff)
    w = wronskian(f_minus, f_plus)
    if abs(w) < WRONSKIAN_TOL * max(1.0, k):
        raise WronskianError(f"Jost Wronskian vanished at lam={lam}")
    conj_plus = (f_plus[0].conjugate(), f_plus[1].conjugate())
    conj_minus = (f_minus[0].conjugate(), f_minus[1].conjugate())
    data = ScatteringData(
        lam=float(lam),
        k=k,
        R=complex(-wronskian(f_minus, conj_plus) / w),
        T=complex(2j * k / w),
        R_left=complex(-wronskian(conj_minus, f_plus) / w),
        x=float(x),
        f_plus_at_x=f_plus[0],
        f_minus_at_x=f_minus[0],
    )
    if data.unitarity_defect > 1e-8:
        logger.warning(f"Unitarity defect {data.unitarity_defect:.2e} at lam={lam}")
    return data


def xi_from_scattering(data: ScatteringData) -> float:
    """1/2 + arg(1 + R f_+^2 / |f_+|^2) / pi; |xi - 1/2| <= arcsin|R| / pi."""
    f = data.f_plus_at_x
    bracket = 1.0 + data.R * f * f / (abs(f) ** 2)
    if bracket.real <= 0:
        logger.warning(f"Non-positive bracket real part {bracket.real:.3e} at lam={data.lam}")
    return float(min(max(0.5 + np.angle(bracket) / math.pi, 0.0), 1.0))


def xi_scattering(V: Potential, x: float, lam: float, cutoff: Optional[float] = None) -> float:
    """xi(x, lam) for lam > 0 through the reflection coefficient."""
    return xi_from_scattering(reflection_coefficient(V, lam, x, cutoff))
