"""Fixed-point iteration on K(t, tau) = a e^{t tau} for a range of
approximation degrees, printing the contraction estimate and the trace.

    python scripts/iteration_demo.py --degrees 2 4 6 8 --amplitude 1
"""

from __future__ import annotations

import argparse

import numpy as np

from mpfide.corpus import exp_kernel_problem
from mpfide.errors import ContractionFailedError, NoConvergenceError
from mpfide.itersolve import solve_nondegenerate
from mpfide.model import SolverOptions


def error(sol, xstar) -> float:
    ts, xs = sol.nodes()
    return max(float(np.max(np.abs(x - xstar(t)))) for t, x in zip(ts, xs))


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--degrees", type=int, nargs="+", default=[2, 3, 4, 6, 8])
    parser.add_argument("--amplitude", type=float, default=1.0)
    parser.add_argument("--tol", type=float, default=1e-10)
    args = parser.parse_args(argv)

    p, xstar = exp_kernel_problem(args.amplitude)
    opts = SolverOptions(tol=args.tol)
    for degree in args.degrees:
        try:
            sol, trace = solve_nondegenerate(p, degree, opts)
        except ContractionFailedError as exc:
            print(f"degree {degree}: {exc.code} (q = {exc.details['q']:.3g})")
            continue
        except NoConvergenceError as exc:
            sol, trace = exc.solution, exc.trace
        print(f"degree {degree}: eps = {trace.epsilon:.3e}, C_k = {trace.c_k:.3e}, "
              f"q = {trace.q_estimate:.3e}, converged = {trace.converged}")
        print(f"  {'i':>3} {'delta':>10} {'bound':>10} {'error':>10}")
        for i, it in enumerate(trace.iterates):
            delta = f"{trace.deltas[i - 1]:10.2e}" if i else " " * 10
            print(f"  {i:3d} {delta} {trace.bound_history[i]:10.2e} {error(it, xstar):10.2e}")


if __name__ == "__main__":
    main()
