"""Mixed-precision Runge--Kutta time integration with fast-diagonalization
preconditioned Krylov stage solves."""
from .linalg import Precision, StencilKind
from .operators import Equation, advection_problem, heat_problem, make_problem
from .stepper import IntegrationConfig, PrecisionPolicy, integrate, temporal_order
from .tableaux import ButcherTableau, Method, builtin, midpoint_corrected, parse_method

__version__ = "0.1.0"

__all__ = [
    "Precision",
    "StencilKind",
    "Equation",
    "heat_problem",
    "advection_problem",
    "make_problem",
    "IntegrationConfig",
    "PrecisionPolicy",
    "integrate",
    "temporal_order",
    "ButcherTableau",
    "Method",
    "builtin",
    "midpoint_corrected",
    "parse_method",
]
