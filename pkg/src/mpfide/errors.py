"""Solver failure modes.  Each carries the machine-readable code the CLI
reports and the exit status it maps to."""

from __future__ import annotations


class SolverError(Exception):
    code = "SOLVER_ERROR"
    exit_status = 1

    def __init__(self, message: str, **details):
        self.details = details
        super().__init__(message)


class NotRegularError(SolverError):
    code = "NOT_REGULAR"
    exit_status = 3


class NotWellPosedError(SolverError):
    code = "NOT_WELL_POSED"
    exit_status = 4


class ContractionFailedError(SolverError):
    code = "CONTRACTION_FAILED"
    exit_status = 5


class NoConvergenceError(SolverError):
    code = "NO_CONVERGENCE"
    exit_status = 6

    def __init__(self, message: str, trace=None, solution=None, **details):
        self.trace = trace
        self.solution = solution
        super().__init__(message, **details)


class NoUniqueSolutionError(SolverError):
    code = "NO_UNIQUE_SOLUTION"
