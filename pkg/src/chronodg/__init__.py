"""Time integrators for the linear oscillator ``u'' + lam u = 0``.

Newmark, Lobatto IIIC, general linear methods and two discontinuous Galerkin
time steppers, together with the tools used to compare them.
"""

from .errors import ChronoDGError
from .problem import REFERENCE_PROBLEM, Oscillator

__all__ = ["ChronoDGError", "Oscillator", "REFERENCE_PROBLEM"]
__version__ = "0.1.0"
