"""Degenerate approximations of general kernels.

Each kernel entry is interpolated on a tensor Chebyshev-extrema grid over
``[0, T]^2``::

    K_ab(t, tau) ~ sum_{p,q <= degree} c^ab_pq T_p(t') T_q(tau')

with ``t' = 2t/T - 1``.  The sum is regrouped as ``sum_p phi_p(t) psi_p(tau)``
with ``phi_p(t) = T_p(t') I`` and ``(psi_p)_ab(tau) = sum_q c^ab_pq T_q(tau')``,
so the rank is ``degree + 1`` whatever ``n`` is.

The defect ``max_t int_0^T ||K - sum phi psi|| dtau`` is *measured* on a grid,
not bounded.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as C

from .model import DegenerateKernel
from .odequad import SubintervalMesh, simpson_weights

DEFAULT_GRID = 128


@dataclass(frozen=True)
class ApproximationReport:
    kernel: DegenerateKernel
    epsilon: float  # measured, not certified
    degree: int
    sample_grid: int
    coefficients: np.ndarray  # (degree+1, degree+1, n, n): c[p, q] per entry


def chebyshev_nodes(degree: int) -> np.ndarray:
    """Extrema ``cos(j pi / degree)`` on [-1, 1]; the centre for degree 0."""
    if degree == 0:
        return np.zeros(1)
    return np.cos(np.pi * np.arange(degree + 1) / degree)


def _phi(p: int, T: float, n: int) -> Callable[[float], np.ndarray]:
    unit = np.zeros(p + 1)
    unit[p] = 1.0
    eye = np.eye(n)

    def phi(t):
        return C.chebval(2.0 * t / T - 1.0, unit) * eye

    return phi


def _psi(coef: np.ndarray, T: float) -> Callable[[float], np.ndarray]:
    # coef: (degree+1, n, n), indexed by q
    def psi(tau):
        return C.chebval(2.0 * tau / T - 1.0, coef)

    return psi


def build_degenerate_approx(K: Callable[[float, float], np.ndarray], degree: int, T: float,
                            n: int, grid: int = DEFAULT_GRID) -> ApproximationReport:
    if degree < 0:
        raise ValueError("degree must be non-negative")
    x = chebyshev_nodes(degree)
    pts = (x + 1.0) * (T / 2.0)
    samples = np.empty((degree + 1, degree + 1, n, n))
    for i, t in enumerate(pts):
        for j, tau in enumerate(pts):
            samples[i, j] = np.asarray(K(float(t), float(tau)), dtype=float).reshape(n, n)
    V = C.chebvander(x, degree)  # V[i, p] = T_p(x_i)
    # samples = V c V^T entry-wise  =>  c = V^-1 samples V^-T
    flat = samples.reshape(degree + 1, degree + 1, n * n)
    left = np.linalg.solve(V, flat.reshape(degree + 1, -1)).reshape(flat.shape)
    coef = np.linalg.solve(V, left.transpose(1, 0, 2).reshape(degree + 1, -1))
    coef = coef.reshape(degree + 1, degree + 1, n * n).transpose(1, 0, 2).reshape(samples.shape)

    phi = tuple(_phi(p, T, n) for p in range(degree + 1))
    psi = tuple(_psi(coef[p], T) for p in range(degree + 1))
    dk = DegenerateKernel(phi, psi)
    eps = estimate_epsilon(K, dk, T, grid)
    return ApproximationReport(dk, eps, degree, grid, coef)


def estimate_epsilon(K: Callable[[float, float], np.ndarray], dk: DegenerateKernel, T: float,
                     grid: int = DEFAULT_GRID) -> float:
    """Grid maximum over ``t`` of the Simpson integral in ``tau`` of the
    max-norm defect; ``grid`` is both the t-point count and the tau panel count."""
    if grid < 64 or grid % 2:
        raise ValueError("grid must be an even number >= 64")
    mesh = SubintervalMesh(0.0, T, grid)
    taus = mesh.nodes
    ts = np.linspace(0.0, T, grid)
    w = simpson_weights(mesh)
    phis = [np.stack([np.asarray(f(float(t))) for t in ts]) for f in dk.phi]
    psis = [np.stack([np.asarray(f(float(s))) for s in taus]) for f in dk.psi]
    eps = 0.0
    for i, t in enumerate(ts):
        approx = sum(np.matmul(ph[i], ps) for ph, ps in zip(phis, psis))
        exact = np.stack([np.asarray(K(float(t), float(s)), dtype=float) for s in taus])
        defect = np.sum(np.abs(exact - approx), axis=2).max(axis=1)  # row-sum norm per tau
        eps = max(eps, float(w @ defect))
    return eps
