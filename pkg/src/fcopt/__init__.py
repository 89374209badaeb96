"""Methods for fully composite convex optimization, min F(x, f(x))."""

from .errors import (ConfigError, ConvergenceError, DomainError, FCOptError,
                     InapplicableMethodError, ModelInfeasibleError)
from .linalg import NormOperator
from .methods import METHODS, CompositeProblem, MethodConfig, RunTrace, run_method
from .outer import OuterFunction, SimpleSet
from .problem_io import load_problem, save_problem, write_trace
from .smooth import (Affine, AffineLogSumExp, Constants, PowerOfNorm, Quadratic, Sum,
                     VectorFunction, beta, condition_number, hat_beta)

__version__ = "0.1.0"

__all__ = [
    "Affine", "AffineLogSumExp", "CompositeProblem", "ConfigError", "Constants",
    "ConvergenceError", "DomainError", "FCOptError", "InapplicableMethodError", "METHODS",
    "MethodConfig", "ModelInfeasibleError", "NormOperator", "OuterFunction", "PowerOfNorm",
    "Quadratic", "RunTrace", "SimpleSet", "Sum", "VectorFunction", "beta", "condition_number",
    "hat_beta", "load_problem", "run_method", "save_problem", "write_trace",
]
