"""Independent checks for computed solutions.

Nothing here goes through the parameter system: residuals are taken in the
original integro-differential equation, the rank-1 constant-coefficient
class is solved in closed form, and ``G``/``V`` are recomputed from
arbitrary (non-normalized) fundamental matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .densela import max_norm
from .errors import NoUniqueSolutionError
from .model import (
    DegenerateKernel,
    Diagnostics,
    GeneralKernel,
    Partition,
    Problem,
    Solution,
    default_partition,
)
from .odequad import GridFunction, sample, simpson_weights


@dataclass(frozen=True)
class ResidualReport:
    ode_residual: float
    boundary_residual: float
    probe_count: int


# fourth-order first-derivative stencils (multiply by 1/(12 h))
_CENTRAL = np.array([1.0, -8.0, 0.0, 8.0, -1.0])
_FORWARD0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0])
_FORWARD1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0])


def derivative(g: GridFunction) -> np.ndarray:
    """Order-4 finite-difference derivative at every node of ``g``."""
    v = g.values
    N = v.shape[0] - 1
    if N < 4:
        raise ValueError("need at least 4 steps for order-4 differences")
    h = g.mesh.h
    out = np.empty_like(v)
    out[2:N - 1] = np.tensordot(
        _CENTRAL, np.stack([v[i:N - 3 + i] for i in range(5)]), axes=(0, 0)
    )
    out[0] = np.tensordot(_FORWARD0, v[0:5], axes=(0, 0))
    out[1] = np.tensordot(_FORWARD1, v[0:5], axes=(0, 0))
    out[N] = -np.tensordot(_FORWARD0, v[N:N - 5 if N > 4 else None:-1], axes=(0, 0))
    out[N - 1] = -np.tensordot(_FORWARD1, v[N:N - 5 if N > 4 else None:-1], axes=(0, 0))
    return out / (12.0 * h)


def _integral_operator(p: Problem, s: Solution):
    taus = np.concatenate([g.nodes for g in s.grid])
    w = np.concatenate([simpson_weights(g.mesh) for g in s.grid])
    xs = np.concatenate([g.values for g in s.grid])
    kern = p.kernel
    if isinstance(kern, DegenerateKernel):
        moments = [np.einsum("i,iab,ib->a", w, sample(q, taus), xs) for q in kern.psi]
        return lambda t: sum(np.asarray(phi(t)) @ mom for phi, mom in zip(kern.phi, moments))
    return lambda t: np.einsum("i,iab,ib->a", w, np.stack([kern(t, float(u)) for u in taus]), xs)


def _boundary_residual(p: Problem, s: Solution) -> float:
    pts = np.asarray(s.partition.points)
    total = -np.array(p.condition.d, dtype=float)
    for t, B in zip(p.condition.points, p.condition.b):
        q = int(np.argmin(np.abs(pts - t)))
        total = total + B @ s.value_at_point(q)
    return max_norm(total)


def residual(p: Problem, s: Solution) -> ResidualReport:
    """Residuals of ``s`` in the original equation and multipoint condition."""
    integral = _integral_operator(p, s)
    worst, count = 0.0, 0
    for g in s.grid:
        dx = derivative(g)
        for t, x, xp in zip(g.nodes, g.values, dx):
            t = float(t)
            r = xp - np.asarray(p.a_fn(t)) @ x - integral(t) - np.asarray(p.f_fn(t))
            worst = max(worst, max_norm(r))
            count += 1
    return ResidualReport(worst, _boundary_residual(p, s), count)


# -- rank-1 closed form ----------------------------------------------------


def _scalar_constant(fn, T: float, what: str) -> float:
    vals = [float(np.asarray(fn(t)).reshape(-1)[0]) for t in np.linspace(0.0, T, 7)]
    if max(vals) - min(vals) > 1e-14 * max(1.0, abs(vals[0])):
        raise ValueError(f"{what} is not constant")
    return vals[0]


def _kernel_constant(p: Problem) -> float:
    kern = p.kernel
    T = p.T
    if isinstance(kern, DegenerateKernel):
        if kern.k != 1:
            raise ValueError("closed form needs a rank-1 kernel")
        return _scalar_constant(kern.phi[0], T, "phi") * _scalar_constant(kern.psi[0], T, "psi")
    if isinstance(kern, GeneralKernel):
        vals = [float(kern(t, u)[0, 0]) for t in (0.0, T / 3, T) for u in (0.0, T / 2, T)]
        if max(vals) - min(vals) > 1e-14 * max(1.0, abs(vals[0])):
            raise ValueError("kernel is not constant")
        return vals[0]
    raise ValueError("unsupported kernel")


def rank1_closed_form(p: Problem, part: Partition | None = None) -> Solution:
    """Analytic solution of ``x' = a x + kappa int_0^T x + f`` with constant
    ``a``, ``kappa``, sampled on the partition meshes.

    With ``S(t) = (e^{at} - 1)/a`` and ``P(t) = int_0^t e^{a(t-s)} f(s) ds``
    every solution is ``x = lam e^{at} + kappa mu S(t) + P(t)``; the moment
    equation for ``mu = int_0^T x`` and the multipoint condition give two
    scalar equations for ``(lam, mu)``.
    """
    if p.n != 1:
        raise ValueError("closed form is scalar only")
    T = p.T
    a = _scalar_constant(p.a_fn, T, "A")
    kappa = _kernel_constant(p)

    def S(t):
        return np.expm1(a * t) / a if a != 0.0 else t

    def f(s):
        return float(np.asarray(p.f_fn(s)).reshape(-1)[0])

    def P(t):
        if t == 0.0:
            return 0.0
        return integrate.quad(lambda s: np.exp(a * (t - s)) * f(s), 0.0, t,
                              epsabs=1e-14, epsrel=1e-13, limit=200)[0]

    E1 = S(T)
    S1 = (S(T) - T) / a if a != 0.0 else 0.5 * T * T
    P1 = integrate.quad(lambda s: f(s) * S(T - s), 0.0, T, epsabs=1e-14, epsrel=1e-13,
                        limit=200)[0]
    bs = [float(np.asarray(B).reshape(-1)[0]) for B in p.condition.b]
    pts = p.condition.points
    d = float(np.asarray(p.condition.d).reshape(-1)[0])
    mat = np.array([
        [-E1, 1.0 - kappa * S1],
        [sum(b * np.exp(a * t) for b, t in zip(bs, pts)), kappa * sum(b * S(t) for b, t in zip(bs, pts))],
    ])
    rhs = np.array([P1, d - sum(b * P(t) for b, t in zip(bs, pts))])
    det = np.linalg.det(mat)
    if abs(det) <= 1e-12 * max(1.0, np.max(np.abs(mat)) ** 2):
        raise NoUniqueSolutionError(f"closed-form system is singular (det = {det:.3e})")
    lam0, mu = np.linalg.solve(mat, rhs)

    def x(t):
        return lam0 * np.exp(a * t) + kappa * mu * S(t) + P(t)

    part = part or default_partition(p)
    grid = tuple(GridFunction(mesh, np.array([[x(float(t))] for t in mesh.nodes])) for mesh in part.meshes)
    lam = np.array([[x(float(t))] for t in part.points[:-1]])
    return Solution(part, lam, np.array([[mu]]), grid, Diagnostics(regular=True))


# -- G and V from arbitrary fundamental matrices ---------------------------


def _fundamental_sweep(p: Problem, kern: DegenerateKernel, mesh, C0: np.ndarray):
    """RK4 for ``X' = A X``, ``Y_j' = X^{-1} phi_j``, ``Y_A' = X^{-1} A`` from
    ``X = C0``, ``Y = 0``.  Returns ``X`` and ``[Y_1..Y_k, Y_A]`` at the nodes."""
    n, k = p.n, kern.k
    forcings = list(kern.phi) + [p.a_fn]

    def rhs(t, X):
        Xinv = np.linalg.inv(X)
        return np.asarray(p.a_fn(t)) @ X, np.stack([Xinv @ np.asarray(fn(t)) for fn in forcings])

    h = mesh.h
    X = np.array(C0, dtype=float)
    Y = np.zeros((k + 1, n, n))
    Xs, Ys = [X], [Y]
    for t in mesh.nodes[:-1]:
        t = float(t)
        k1 = rhs(t, X)
        k2 = rhs(t + h / 2, X + h / 2 * k1[0])
        k3 = rhs(t + h / 2, X + h / 2 * k2[0])
        k4 = rhs(t + h, X + h * k3[0])
        X = X + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        Y = Y + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        Xs.append(X)
        Ys.append(Y)
    return np.stack(Xs), np.stack(Ys, axis=1)


def fundamental_tables(p: Problem, part: Partition, seeds: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """``G`` blocks ``(k, k, n, n)`` and ``V`` blocks ``(k, m, n, n)`` computed
    from fundamental matrices ``X_r`` with ``X_r(t_{r-1}) = seeds[r]``."""
    kern = p.kernel
    if not isinstance(kern, DegenerateKernel):
        raise TypeError("needs a degenerate kernel")
    n, k, m = p.n, kern.k, part.m
    G = np.zeros((k, k, n, n))
    inner = np.zeros((k, m, k, n, n))  # [p, s, j] = int_s psi_p X_s int X_s^-1 phi_j
    inner_A = np.zeros((k, m, n, n))
    psi_int = np.zeros((k, m, n, n))
    for r, mesh in enumerate(part.meshes):
        X, Y = _fundamental_sweep(p, kern, mesh, seeds[r])
        Z = np.einsum("iab,jibc->jiac", X, Y)  # X(t) Y(t)
        ps = np.stack([sample(q, mesh.nodes) for q in kern.psi])
        w = simpson_weights(mesh)
        inner[:, r] = np.einsum("i,piab,jibc->pjac", w, ps, Z[:k])
        inner_A[:, r] = np.einsum("i,piab,ibc->pac", w, ps, Z[k])
        psi_int[:, r] = np.einsum("i,piab->pab", w, ps)
        G += inner[:, r]
    V = inner_A + np.einsum("psjab,jrbc->prac", inner, psi_int)
    return G, V
