"""
xitrace - Krein spectral shift function xi(x, lambda) and trace formulas
for one-dimensional Schrodinger and Jacobi operators.
"""

__version__ = "0.1.0"

from xitrace.errors import DescriptorError, NumericalQualityError, XiTraceError
from xitrace.jacobi import JacobiOperator
from xitrace.potentials import Potential
from xitrace.spectral import GreensValue, XiGrid, XiPoint

__all__ = [
    "__version__",
    "DescriptorError",
    "GreensValue",
    "JacobiOperator",
    "NumericalQualityError",
    "Potential",
    "XiGrid",
    "XiPoint",
    "XiTraceError",
]
