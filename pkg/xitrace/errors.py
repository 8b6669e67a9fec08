"""
Exception hierarchy for xitrace.

Descriptor problems map to CLI exit code 2, numerical-quality failures to
exit code 3. Recoverable quality issues are reported as flags on result
objects instead of being raised.
"""


class XiTraceError(Exception):
    """Base class for all xitrace errors."""

    exit_code = 1


class DescriptorError(XiTraceError, ValueError):
    """A configuration or operator descriptor could not be parsed."""

    exit_code = 2


class UnsortedJumpsError(XiTraceError, ValueError):
    """Jump locations of a step function are not sorted."""


class NumericalQualityError(XiTraceError):
    """A numerical computation failed its quality gate."""

    exit_code = 3


class StepSizeUnderflowError(NumericalQualityError):
    """ODE integrator could not advance (stiff or blow-up region)."""


class BracketError(NumericalQualityError):
    """No sign change inside the requested root bracket."""


class ConvergenceError(NumericalQualityError):
    """An iterative refinement did not settle."""


class BoxConvergenceError(ConvergenceError):
    """Doubling the truncation box moved the eigenvalues."""


class CutoffSensitivityError(ConvergenceError):
    """Doubling the Weyl cutoff moved the log-derivative."""


class ContinuedFractionDepthError(ConvergenceError):
    """Continued fraction depth too small for the requested Im z."""


class WronskianError(NumericalQualityError):
    """Wronskian of the Weyl solutions vanished numerically."""


class InterlacingError(NumericalQualityError):
    """Spectral data violates the rank-one interlacing pattern."""


class CoverageError(NumericalQualityError):
    """A xi function does not cover the range a formula needs."""


class ShortRangeError(NumericalQualityError):
    """Potential is not negligible beyond the scattering cutoff."""


class EvennessError(NumericalQualityError):
    """Potential failed the V(x) = V(-x) check."""
