"""Parameterization pipeline for degenerate kernels.

Steps, for a partition ``0 = t_0 < ... < t_m = T`` with ``lambda_r = x(t_{r-1})``:

1. On each subinterval solve the zero-start Cauchy problems
   ``X' = A X + phi_j``, ``X' = A X + A`` and ``x' = A x + f`` by RK4 and
   integrate them against ``psi_p`` by Simpson (:func:`build_tables`).
2. Assemble ``G`` and decide regularity from ``I - G``; refine by halving
   when it is singular.
3. Assemble and solve the block system ``Q lambda = rhs`` for the left
   endpoint values (:func:`assemble_param_system`, :func:`solve_params`).
4. Recover the moments ``mu``, form the right-hand side function and
   integrate ``x' = A x + F(t)`` from each ``lambda_r``
   (:func:`recover_mu`, :func:`rhs_function`, :func:`reconstruct`).

Block tables are ndarrays indexed as documented on :class:`SpecialTables`.
Sums over subintervals run in ascending ``r`` so results do not depend on
evaluation order.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import densela
from .densela import SingularMatrixError, max_norm
from .errors import NotRegularError, NotWellPosedError
from .model import (
    DegenerateKernel,
    Diagnostics,
    Partition,
    Problem,
    Solution,
    SolverOptions,
    default_partition,
    make_partition,
)
from .odequad import rk4_cauchy, rk4_ivp, sample, simpson_weights

NORM_C_NOTE = "||C|| in the well-posedness constant evaluated as ||B_m||"
ALPHA_NOTE = "alpha = max ||A(t)|| sampled on mesh nodes"


def to_blocks(mat: np.ndarray, rows: int, cols: int, n: int) -> np.ndarray:
    """``(rows*n, cols*n)`` matrix -> ``(rows, cols, n, n)`` block array."""
    return mat.reshape(rows, n, cols, n).transpose(0, 2, 1, 3)


def from_blocks(blocks: np.ndarray) -> np.ndarray:
    rows, cols, n, _ = blocks.shape
    return blocks.transpose(0, 2, 1, 3).reshape(rows * n, cols * n)


@dataclass
class SpecialTables:
    """Quadrature tables of the special Cauchy problem.

    Shapes (``k`` kernel terms, ``m`` subintervals, dimension ``n``)::

        psi_hat       (k, m, n, n)     int_r psi_p
        psi_hat_phi   (k, m, k, n, n)  [p, r, j] = int_r psi_p E_r(A, phi_j)
        psi_hat_A     (k, m, n, n)     int_r psi_p E_r(A, A)
        psi_hat_f     (k, m, n)        int_r psi_p E_r(A, f)
        e_phi         (m, k, n, n)     E_r(A, phi_j) at t_r
        e_A           (m, n, n)        E_r(A, A) at t_r
        e_f           (m, n)           E_r(A, f) at t_r
        G             (nk, nk)
        V             (k, m, n, n)
        g             (k, n)
        M             (nk, nk) or None when I - G is singular
    """

    n: int
    k: int
    m: int
    psi_hat: np.ndarray
    psi_hat_phi: np.ndarray
    psi_hat_A: np.ndarray
    e_phi: np.ndarray
    e_A: np.ndarray
    G: np.ndarray
    V: np.ndarray
    M: np.ndarray | None
    regular: bool
    norm_inv: float | None
    psi_hat_f: np.ndarray | None = None
    e_f: np.ndarray | None = None
    g: np.ndarray | None = None
    psi_nodes: list = field(default_factory=list, repr=False)

    @property
    def G_blocks(self) -> np.ndarray:
        return to_blocks(self.G, self.k, self.k, self.n)

    @property
    def M_blocks(self) -> np.ndarray:
        return to_blocks(self.M, self.k, self.k, self.n)


@dataclass(frozen=True)
class Regularity:
    regular: bool
    norm_inv: float | None
    M: np.ndarray | None = None


def check_regularity(tables) -> Regularity:
    """Regular iff ``I - G`` is invertible; accepts tables or ``G`` itself."""
    G = np.atleast_2d(np.asarray(getattr(tables, "G", tables), dtype=float))
    scale = max(1.0, max_norm(G))
    try:
        M = densela.invert(np.eye(G.shape[0]) - G, scale=scale)
    except SingularMatrixError:
        return Regularity(False, None)
    return Regularity(True, max_norm(M), M)


def _kernel(p: Problem) -> DegenerateKernel:
    if not isinstance(p.kernel, DegenerateKernel):
        raise TypeError("the parameterization pipeline needs a degenerate kernel")
    return p.kernel


def build_tables(p: Problem, part: Partition, forcing: bool = True) -> SpecialTables:
    kern = _kernel(p)
    n, k, m = p.n, kern.k, part.m
    psi_hat = np.zeros((k, m, n, n))
    psi_hat_phi = np.zeros((k, m, k, n, n))
    psi_hat_A = np.zeros((k, m, n, n))
    e_phi = np.zeros((m, k, n, n))
    e_A = np.zeros((m, n, n))
    psi_nodes = []

    def stacked_rhs(t):
        return np.hstack([np.asarray(phi(t), dtype=float) for phi in kern.phi] + [p.a_fn(t)])

    for r, mesh in enumerate(part.meshes):
        E = rk4_cauchy(p.a_fn, stacked_rhs, mesh).values
        E = E.reshape(mesh.steps + 1, n, k + 1, n).transpose(2, 0, 1, 3)
        ps = np.stack([sample(psi, mesh.nodes) for psi in kern.psi])
        w = simpson_weights(mesh)
        psi_hat[:, r] = np.einsum("i,piab->pab", w, ps)
        psi_hat_phi[:, r] = np.einsum("i,piab,jibc->pjac", w, ps, E[:k])
        psi_hat_A[:, r] = np.einsum("i,piab,ibc->pac", w, ps, E[k])
        e_phi[r] = E[:k, -1]
        e_A[r] = E[k, -1]
        psi_nodes.append(ps)

    G_blocks = np.zeros((k, k, n, n))
    for r in range(m):
        G_blocks += psi_hat_phi[:, r]
    V = psi_hat_A + np.einsum("pjab,jrbc->prac", G_blocks, psi_hat)
    G = from_blocks(G_blocks)
    reg = check_regularity(G)
    tables = SpecialTables(
        n, k, m, psi_hat, psi_hat_phi, psi_hat_A, e_phi, e_A, G, V,
        reg.M, reg.regular, reg.norm_inv, psi_nodes=psi_nodes,
    )
    if forcing:
        tables = with_forcing(tables, p, part)
    return tables


def with_forcing(tables: SpecialTables, p: Problem, part: Partition) -> SpecialTables:
    """Tables for the forcing ``p.f_fn``; the kernel-dependent parts are reused."""
    n, k, m = tables.n, tables.k, tables.m
    psi_hat_f = np.zeros((k, m, n))
    e_f = np.zeros((m, n))
    for r, mesh in enumerate(part.meshes):
        E = rk4_cauchy(p.a_fn, p.f_fn, mesh).values
        w = simpson_weights(mesh)
        psi_hat_f[:, r] = np.einsum("i,piab,ib->pa", w, tables.psi_nodes[r], E)
        e_f[r] = E[-1]
    g = np.zeros((k, n))
    for r in range(m):
        g += psi_hat_f[:, r]
    return dataclasses.replace(tables, psi_hat_f=psi_hat_f, e_f=e_f, g=g)


# -- parameter system ------------------------------------------------------


def expand_boundary(p: Problem, part: Partition) -> list[np.ndarray]:
    """Condition matrices aligned to the partition points (zero elsewhere)."""
    pts = np.asarray(part.points)
    out = [np.zeros((p.n, p.n)) for _ in pts]
    tol = 1e-12 * max(1.0, abs(part.T))
    for t, B in zip(p.condition.points, p.condition.b):
        q = int(np.argmin(np.abs(pts - t)))
        if abs(pts[q] - t) > tol:
            raise ValueError(f"condition point {t} is not a partition point")
        out[q] = out[q] + B
    return out


@dataclass
class ParamSystem:
    D: np.ndarray  # (m, m, n, n)
    Q: np.ndarray  # (nm, nm)
    scale: float  # magnitude reference for the singularity test on Q
    F: np.ndarray | None = None  # (m, n)
    rhs: np.ndarray | None = None  # (nm,)
    _factor: densela.LUFactor | None = field(default=None, repr=False)

    @property
    def factor(self) -> densela.LUFactor:
        if self._factor is None:
            self._factor = densela.lu_factor(self.Q, scale=self.scale)
        return self._factor


def _mv_blocks(tables: SpecialTables) -> np.ndarray:
    """``[j, i] = sum_p M_{j,p} V_{p,i}``, shape (k, m, n, n)."""
    return np.einsum("jpab,pibc->jiac", tables.M_blocks, tables.V)


def assemble_param_system(p: Problem, part: Partition, tables: SpecialTables) -> ParamSystem:
    if not tables.regular:
        raise NotRegularError("I - G is singular for this partition")
    n, m = p.n, part.m
    C = _mv_blocks(tables) + tables.psi_hat
    D = np.einsum("rjab,jibc->riac", tables.e_phi, C)
    for r in range(m):
        D[r, r] += tables.e_A[r]

    B = expand_boundary(p, part)
    eye = np.eye(n)
    Q = np.zeros((m, m, n, n))
    Qabs = np.zeros((m, m, n, n))
    Bm = B[m]
    for i in range(m):
        Q[0, i] = B[i] + Bm @ D[m - 1, i]
        Qabs[0, i] = np.abs(B[i]) + np.abs(Bm) @ np.abs(D[m - 1, i])
    Q[0, m - 1] += Bm
    Qabs[0, m - 1] += np.abs(Bm)
    for q in range(1, m):
        Q[q] = D[q - 1]
        Qabs[q] = np.abs(D[q - 1])
        Q[q, q - 1] += eye
        Q[q, q] -= eye
        Qabs[q, q - 1] += eye
        Qabs[q, q] += eye
    sys = ParamSystem(D, from_blocks(Q), max_norm(from_blocks(Qabs)))
    if tables.g is not None:
        sys.F, sys.rhs = _forcing_terms(p, tables, D.shape[0], B)
    return sys


def _forcing_terms(p: Problem, tables: SpecialTables, m: int, B) -> tuple[np.ndarray, np.ndarray]:
    Mg = np.einsum("jpab,pb->ja", tables.M_blocks, tables.g)
    F = np.einsum("rjab,jb->ra", tables.e_phi, Mg) + tables.e_f
    rhs = np.empty((m, p.n))
    rhs[0] = p.condition.d - B[m] @ F[m - 1]
    rhs[1:] = -F[: m - 1]
    return F, rhs.reshape(-1)


def update_forcing(sys: ParamSystem, p: Problem, part: Partition,
                   tables: SpecialTables) -> ParamSystem:
    """Same ``Q`` (and factorization), new ``F`` and right-hand side."""
    F, rhs = _forcing_terms(p, tables, part.m, expand_boundary(p, part))
    return dataclasses.replace(sys, F=F, rhs=rhs, _factor=sys._factor)


def solve_params(sys: ParamSystem) -> np.ndarray:
    """Left-endpoint values ``lambda``, shape (m, n)."""
    lam = sys.factor.solve(sys.rhs)
    m = sys.D.shape[0]
    return lam.reshape(m, -1)


def recover_mu(tables: SpecialTables, lam: np.ndarray) -> np.ndarray:
    """Moments ``mu_s = sum_j (sum_p M_{s,p} V_{p,j}) lambda_j + sum_p M_{s,p} g_p``."""
    mv = _mv_blocks(tables)
    return np.einsum("sjab,jb->sa", mv, lam) + np.einsum("spab,pb->sa", tables.M_blocks, tables.g)


def rhs_function(p: Problem, tables: SpecialTables, lam: np.ndarray,
                 mu: np.ndarray) -> Callable[[float], np.ndarray]:
    """``F*(t) = sum_s phi_s(t) [mu_s + sum_r psi_hat_{s,r} lambda_r] + f(t)``."""
    kern = _kernel(p)
    coef = mu + np.einsum("srab,rb->sa", tables.psi_hat, lam)

    def fstar(t):
        out = np.array(p.f_fn(t), dtype=float)
        for phi, c in zip(kern.phi, coef):
            out += np.asarray(phi(t)) @ c
        return out

    return fstar


def reconstruct(p: Problem, part: Partition, lam: np.ndarray,
                fstar: Callable[[float], np.ndarray], mu: np.ndarray | None = None,
                diagnostics: Diagnostics | None = None) -> Solution:
    grid = tuple(rk4_ivp(p.a_fn, fstar, mesh, lam[r]) for r, mesh in enumerate(part.meshes))
    diag = diagnostics if diagnostics is not None else Diagnostics(regular=True)
    B = expand_boundary(p, part)
    values = [lam[q] for q in range(part.m)] + [grid[-1].end]
    bres = sum(Bq @ x for Bq, x in zip(B, values)) - p.condition.d
    diag.boundary_residual = max_norm(bres)
    diag.continuity_residual = max(
        (max_norm(lam[q + 1] - grid[q].end) for q in range(part.m - 1)), default=0.0
    )
    if mu is None:
        mu = np.zeros((0, p.n))
    return Solution(part, np.array(lam), np.array(mu), grid, diag)


def refine_partition(part: Partition) -> Partition:
    """Split every subinterval at its midpoint."""
    pts = [part.points[0]]
    for left, right in zip(part.points[:-1], part.points[1:]):
        pts += [0.5 * (left + right), right]
    return make_partition(pts, part.h_max, part.steps)


# -- well-posedness --------------------------------------------------------


@dataclass(frozen=True)
class WellPosedness:
    N_constant: float
    qstar_certified: bool | None
    epsilon_h: float | None
    gamma: float
    alpha: float
    omega: float
    phi_bar: float
    psi_bar: float
    norm_inv_IG: float
    norm_Bm: float
    notes: tuple[str, ...] = (NORM_C_NOTE, ALPHA_NOTE)


def wellposedness_constant(alpha, omega, phi_bar, psi_bar, norm_inv, gamma, norm_c) -> float:
    """Bound N with ``||x||_1 <= N max(||d||, ||f||_1)``."""
    e = math.exp(alpha * omega)
    pmp = phi_bar * norm_inv * psi_bar
    lead = e * (phi_bar * (norm_inv * psi_bar * (e - 1.0 + e * phi_bar * psi_bar) + psi_bar) + 1.0)
    lam_part = gamma * (1.0 + norm_c) * max(1.0, omega * e * (1.0 + e * pmp))
    return lead * lam_part + e * omega * (pmp * e + 1.0)


def wellposedness_diagnostics(p: Problem, part: Partition, tables: SpecialTables,
                              sys: ParamSystem, opts: SolverOptions | None = None) -> WellPosedness:
    opts = opts or SolverOptions()
    kern = _kernel(p)
    nodes = part.all_nodes()
    alpha = max(max_norm(p.a_fn(float(t))) for t in nodes)
    omega = max(r - l for l, r in zip(part.points[:-1], part.points[1:]))
    phi_bar = 0.0
    psi_int = np.zeros(kern.k)
    for r, mesh in enumerate(part.meshes):
        w = simpson_weights(mesh)
        phi_norms = np.array([[max_norm(phi(float(t))) for t in mesh.nodes] for phi in kern.phi])
        phi_bar = max(phi_bar, float(w @ phi_norms.sum(axis=0)))
        psi_norms = np.array([[max_norm(P) for P in ps_p] for ps_p in tables.psi_nodes[r]])
        psi_int += psi_norms @ w
    psi_bar = float(np.max(psi_int))
    Qinv = sys.factor.solve(np.eye(sys.Q.shape[0]))
    gamma = max_norm(Qinv)
    norm_bm = max_norm(p.condition.b[-1])
    N = wellposedness_constant(alpha, omega, phi_bar, psi_bar, tables.norm_inv, gamma, norm_bm)

    certified, eps_h = None, None
    if opts.certify:
        fine = part.doubled()
        fine_tables = build_tables(p, fine, forcing=False)
        if fine_tables.regular:
            fine_sys = assemble_param_system(p, fine, fine_tables)
            eps_h = max_norm(sys.Q - fine_sys.Q)
            certified = bool(gamma * eps_h < 1.0)
        else:
            certified = False
    return WellPosedness(N, certified, eps_h, gamma, alpha, omega, phi_bar, psi_bar,
                         tables.norm_inv, norm_bm)


# -- driver ----------------------------------------------------------------


@dataclass
class Prepared:
    """A regular partition with its tables and factorized parameter system."""

    partition: Partition
    tables: SpecialTables
    system: ParamSystem
    refinements: int


def prepare(p: Problem, opts: SolverOptions | None = None) -> Prepared:
    """Find a regular partition (halving as needed) and factorize ``Q``."""
    opts = opts or SolverOptions()
    part = default_partition(p, opts)
    for attempt in range(opts.max_refinements + 1):
        tables = build_tables(p, part)
        if tables.regular:
            break
        if attempt == opts.max_refinements:
            raise NotRegularError(
                f"I - G singular after {opts.max_refinements} refinements",
                refinements=attempt, m=part.m,
            )
        part = refine_partition(part)
    sys = assemble_param_system(p, part, tables)
    try:
        sys.factor
    except SingularMatrixError as exc:
        raise NotWellPosedError(f"Q* is singular: {exc}", refinements=attempt,
                                m=part.m) from None
    return Prepared(part, tables, sys, attempt)


def solve_prepared(p: Problem, prep: Prepared, diagnostics: Diagnostics | None = None) -> Solution:
    lam = solve_params(prep.system)
    mu = recover_mu(prep.tables, lam)
    fstar = rhs_function(p, prep.tables, lam, mu)
    diag = diagnostics or Diagnostics()
    diag.regular = True
    diag.norm_inv_IG = prep.tables.norm_inv
    diag.refinements = prep.refinements
    return reconstruct(p, prep.partition, lam, fstar, mu, diag)


def solve_degenerate(p: Problem, opts: SolverOptions | None = None) -> Solution:
    opts = opts or SolverOptions()
    prep = prepare(p, opts)
    diag = Diagnostics()
    wp = wellposedness_diagnostics(p, prep.partition, prep.tables, prep.system, opts)
    apply_wellposedness(diag, wp)
    return solve_prepared(p, prep, diag)


def apply_wellposedness(diag: Diagnostics, wp: WellPosedness) -> None:
    diag.wellposedness_constant = wp.N_constant
    diag.qstar_certified = wp.qstar_certified
    diag.epsilon_h = wp.epsilon_h
    diag.gamma = wp.gamma
    diag.notes.extend(wp.notes)
