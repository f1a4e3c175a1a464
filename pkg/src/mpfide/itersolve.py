"""Fixed-point iteration for general (non-separable) kernels.

The kernel is replaced by a degenerate approximation ``K_k``; each step
solves the degenerate problem with the forcing corrected by the defect
acting on the previous iterate::

    f_i(t) = f(t) + int_0^T [K(t, tau) - K_k(t, tau)] x_{i-1}(tau) dtau

The partition, special tables and the factorization of ``Q`` depend only
on ``A`` and ``K_k``, so they are built once; each step redoes the forcing
tables and one back-substitution.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .degsolve import (
    Prepared,
    apply_wellposedness,
    prepare,
    solve_prepared,
    update_forcing,
    wellposedness_diagnostics,
    with_forcing,
)
from .errors import ContractionFailedError, NoConvergenceError
from .kapprox import ApproximationReport, build_degenerate_approx
from .model import Diagnostics, GeneralKernel, Problem, Solution, SolverOptions
from .odequad import simpson_weights

SAFETY = 1.25


@dataclass
class IterationTrace:
    iterates: list[Solution] = field(default_factory=list)
    deltas: list[float] = field(default_factory=list)  # deltas[i-1] = ||x_i - x_{i-1}||_1
    q_estimate: float = float("nan")
    c_k: float = float("nan")
    epsilon: float = float("nan")
    norm_fd: float = float("nan")
    converged: bool = False
    bound_history: list[float] = field(default_factory=list)  # bound at i = 0, 1, ...


def error_bound(trace: IterationTrace, i: int, norm_fd: float) -> float:
    """``q^i C_k max(||f||_1, ||d||) / (1 - q)``."""
    q = trace.q_estimate
    if not q < 1.0:
        raise ValueError(f"no contraction: q = {q}")
    return q**i * trace.c_k * norm_fd / (1.0 - q)


def data_norm(p: Problem, nodes) -> float:
    """``max(||f||_1, ||d||)`` with ``||f||_1`` sampled at ``nodes``."""
    fmax = max(float(np.max(np.abs(p.f_fn(float(t))))) for t in nodes)
    return max(fmax, float(np.max(np.abs(p.condition.d))))


class DefectOperator:
    """``t -> int_0^T [K(t, tau) - K_k(t, tau)] x(tau) dtau`` on the solution grid.

    Per-t rows of Simpson-weighted defect matrices do not change between
    iterations and are cached.
    """

    def __init__(self, kernel: GeneralKernel, approx, partition):
        self.kernel = kernel
        self.approx = approx
        taus, weights = [], []
        for mesh in partition.meshes:
            taus.append(mesh.nodes)
            weights.append(simpson_weights(mesh))
        self.taus = np.concatenate(taus)
        self.weights = np.concatenate(weights)
        self.psi_taus = [np.stack([np.asarray(q(float(s))) for s in self.taus]) for q in approx.psi]
        self._rows: dict[float, np.ndarray] = {}

    def row(self, t: float) -> np.ndarray:
        row = self._rows.get(t)
        if row is None:
            exact = np.stack([self.kernel(t, float(s)) for s in self.taus])
            approx = sum(np.matmul(np.asarray(p(t)), ps) for p, ps in zip(self.approx.phi, self.psi_taus))
            row = self.weights[:, None, None] * (exact - approx)
            self._rows[t] = row
        return row

    def apply(self, t: float, xvals: np.ndarray) -> np.ndarray:
        return np.einsum("iab,ib->a", self.row(t), xvals)


def _stacked_values(sol: Solution) -> np.ndarray:
    return np.concatenate([g.values for g in sol.grid])


def _delta(a: Solution, b: Solution) -> float:
    return float(np.max(np.abs(_stacked_values(a) - _stacked_values(b))))


def solve_nondegenerate(p: Problem, degree: int | None = None,
                        opts: SolverOptions | None = None) -> tuple[Solution, IterationTrace]:
    opts = opts or SolverOptions()
    degree = opts.degree if degree is None else degree
    if not isinstance(p.kernel, GeneralKernel):
        raise TypeError("solve_nondegenerate expects a general kernel")

    report: ApproximationReport = build_degenerate_approx(p.kernel, degree, p.T, p.n)
    p_deg = dataclasses.replace(p, kernel=report.kernel)
    prep: Prepared = prepare(p_deg, opts)
    wp = wellposedness_diagnostics(p_deg, prep.partition, prep.tables, prep.system, opts)

    trace = IterationTrace(epsilon=report.epsilon, c_k=wp.N_constant)
    trace.q_estimate = SAFETY * wp.N_constant * report.epsilon
    trace.norm_fd = data_norm(p, prep.partition.all_nodes())
    if trace.q_estimate >= 1.0:
        raise ContractionFailedError(
            f"q = {SAFETY} * C_k * eps = {trace.q_estimate:.4g} >= 1; raise the degree",
            q=trace.q_estimate, c_k=wp.N_constant, epsilon=report.epsilon, degree=degree,
        )

    def diagnostics():
        diag = Diagnostics()
        apply_wellposedness(diag, wp)
        diag.notes.append(f"kernel approximation degree {degree}, measured epsilon {report.epsilon:.6g}")
        return diag

    x = solve_prepared(p_deg, prep, diagnostics())
    trace.iterates.append(x)
    trace.bound_history.append(error_bound(trace, 0, trace.norm_fd))

    defect = DefectOperator(p.kernel, report.kernel, prep.partition)
    for i in range(1, opts.max_iter + 1):
        xvals = _stacked_values(x)
        cache: dict[float, np.ndarray] = {}

        def forcing(t, xvals=xvals, cache=cache):
            val = cache.get(t)
            if val is None:
                val = np.asarray(p.f_fn(t), dtype=float) + defect.apply(t, xvals)
                cache[t] = val
            return val

        p_i = dataclasses.replace(p_deg, f_fn=forcing)
        tables = with_forcing(prep.tables, p_i, prep.partition)
        sys = update_forcing(prep.system, p_i, prep.partition, tables)
        step = Prepared(prep.partition, tables, sys, prep.refinements)
        x_new = solve_prepared(p_i, step, diagnostics())
        trace.deltas.append(_delta(x_new, x))
        trace.iterates.append(x_new)
        trace.bound_history.append(error_bound(trace, i, trace.norm_fd))
        x = x_new
        if trace.deltas[-1] <= opts.tol:
            trace.converged = True
            return x, trace
    raise NoConvergenceError(
        f"no convergence in {opts.max_iter} iterations (last delta {trace.deltas[-1]:.3e})",
        trace=trace, solution=x, delta=trace.deltas[-1],
    )
