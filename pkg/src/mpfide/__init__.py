"""Parameterization solver for linear multipoint boundary value problems
for systems of Fredholm integro-differential equations."""

from .degsolve import solve_degenerate
from .errors import (
    ContractionFailedError,
    NoConvergenceError,
    NotRegularError,
    NotWellPosedError,
    SolverError,
)
from .itersolve import IterationTrace, solve_nondegenerate
from .kapprox import build_degenerate_approx
from .model import (
    DegenerateKernel,
    GeneralKernel,
    MultipointCondition,
    Problem,
    Solution,
    SolverOptions,
    constant,
    validate,
)

__all__ = [
    "ContractionFailedError",
    "DegenerateKernel",
    "GeneralKernel",
    "IterationTrace",
    "MultipointCondition",
    "NoConvergenceError",
    "NotRegularError",
    "NotWellPosedError",
    "Problem",
    "Solution",
    "SolverError",
    "SolverOptions",
    "build_degenerate_approx",
    "constant",
    "solve_degenerate",
    "solve_nondegenerate",
    "validate",
]
