"""Observed convergence order of the degenerate-kernel solver on the
manufactured rotation problem.

    python scripts/convergence_study.py --steps 8 16 32 64 128
"""

from __future__ import annotations

import argparse
import math

from mpfide.corpus import rotation_problem
from mpfide.degsolve import solve_degenerate
from mpfide.densela import max_norm
from mpfide.model import SolverOptions


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, nargs="+", default=[8, 16, 32, 64, 128])
    parser.add_argument("--T", type=float, default=2.0, help="horizon")
    args = parser.parse_args(argv)

    p, xstar = rotation_problem(args.T)
    print(f"{'steps':>6} {'h':>10} {'max error':>12} {'order':>7} {'bnd res':>9} {'N':>10}")
    prev = None
    for steps in args.steps:
        sol = solve_degenerate(p, SolverOptions(steps=steps))
        ts, xs = sol.nodes()
        err = max(max_norm(x - xstar(t)) for t, x in zip(ts, xs))
        order = f"{math.log2(prev / err):7.3f}" if prev else " " * 7
        d = sol.diagnostics
        print(f"{steps:6d} {sol.partition.meshes[0].h:10.3e} {err:12.3e} {order} "
              f"{d.boundary_residual:9.1e} {d.wellposedness_constant:10.3e}")
        prev = err


if __name__ == "__main__":
    main()
