"""Small dense linear algebra: LU with a relative singularity test, inverse,
and the max-norm family (vector max-norm, induced max-row-sum matrix norm).

Matrices and vectors are plain float ndarrays.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

DEFAULT_RTOL = 1e-12


class SingularMatrixError(np.linalg.LinAlgError):
    def __init__(self, pivot: float, threshold: float):
        self.pivot = pivot
        self.threshold = threshold
        super().__init__(
            f"matrix is singular to working tolerance "
            f"(|pivot| = {pivot:.3e} <= {threshold:.3e})"
        )


def max_norm(a) -> float:
    """Max-norm of a vector, or the max absolute row sum of a matrix."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0.0
    if a.ndim <= 1:
        return float(np.max(np.abs(a)))
    if a.ndim != 2:
        raise ValueError(f"expected a vector or matrix, got shape {a.shape}")
    return float(np.max(np.sum(np.abs(a), axis=1)))


@dataclass(frozen=True)
class LUFactor:
    lu: np.ndarray
    piv: np.ndarray

    @property
    def n(self) -> int:
        return self.lu.shape[0]

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise ValueError(f"right-hand side has {b.shape[0]} rows, expected {self.n}")
        return scipy.linalg.lu_solve((self.lu, self.piv), b)


def lu_factor(a, rtol: float = DEFAULT_RTOL, scale: float | None = None) -> LUFactor:
    """Partial-pivoting LU factorization of a square matrix.

    Raises :class:`SingularMatrixError` when a pivot magnitude is at most
    ``rtol * scale``; ``scale`` defaults to ``max_norm(a)``.  Callers that
    form ``a`` as a difference of larger terms (``I - G``) should pass the
    norm of the terms, since cancellation makes ``max_norm(a)`` meaningless
    as a reference.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if scale is None:
        scale = max_norm(a)
    threshold = rtol * scale
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    worst = int(np.argmin(pivots))
    if pivots[worst] <= threshold:
        raise SingularMatrixError(float(pivots[worst]), threshold)
    return LUFactor(lu, piv)


def lu_solve(a, b, rtol: float = DEFAULT_RTOL, scale: float | None = None) -> np.ndarray:
    """Solve ``a @ x = b``; ``b`` may be a vector or a matrix."""
    return lu_factor(a, rtol=rtol, scale=scale).solve(b)


def invert(a, rtol: float = DEFAULT_RTOL, scale: float | None = None) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    fac = lu_factor(a, rtol=rtol, scale=scale)
    return fac.solve(np.eye(a.shape[0]))
