"""Inscribed rectangles and cyclic quadrilaterals in smooth Jordan curves.

Pegs are found as off-diagonal intersection points of two tori in C^2, located
by multistart Newton on the 4-torus of curve parameters, then checked against
the signed-count and Euler-characteristic bookkeeping of the intersection.
"""

from .curve import (FourierCurve, check_embedded, deriv, evaluate, make_circle, make_ellipse,
                    perturb)
from .geometry import (ComplexPair, Peg, QuadData, extract_quad, extract_rectangle, recompute_data)
from .residual import Problem, TorusQuadruple, residual_quad, residual_rect, sigma, tau
from .solver import SolveConfig, SolveReport, solve

__version__ = "0.1.0"

__all__ = [
    "ComplexPair", "FourierCurve", "Peg", "Problem", "QuadData", "SolveConfig", "SolveReport",
    "TorusQuadruple", "check_embedded", "deriv", "evaluate", "extract_quad", "extract_rectangle",
    "make_circle", "make_ellipse", "perturb", "recompute_data", "residual_quad", "residual_rect",
    "sigma", "solve", "tau",
]
