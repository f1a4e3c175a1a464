"""Command line interface: ``mpfide solve`` and ``mpfide check``.

Exit statuses: 0 success, 1 evaluation failure, 2 PARSE_ERROR (unreadable
or invalid problem file), 3 NOT_REGULAR, 4 NOT_WELL_POSED, 5
CONTRACTION_FAILED, 6 NO_CONVERGENCE.  Every failure writes a report with a
machine-readable ``status`` before exiting.
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from .config import ConfigError, LoadedConfig, load
from .degsolve import (
    assemble_param_system,
    build_tables,
    default_partition,
    refine_partition,
    solve_degenerate,
    wellposedness_diagnostics,
)
from .densela import SingularMatrixError
from .errors import NoConvergenceError, SolverError
from .expr import ExprDomainError
from .itersolve import IterationTrace, solve_nondegenerate
from .kapprox import build_degenerate_approx
from .model import Solution, validate
from .odequad import NonFiniteError

EXIT_OK = 0
EXIT_EVAL = 1
EXIT_PARSE = 2
EXIT_NOT_REGULAR = 3
EXIT_NOT_WELL_POSED = 4


@dataclass
class RunConfig:
    config: str
    out: str | None = None
    report: str | None = None
    fmt: str = "csv"
    degree: int | None = None
    h_max: float | None = None
    steps: int | None = None
    tol: float | None = None
    max_iter: int | None = None
    max_refine: int | None = None

    def __post_init__(self):
        if self.tol is not None and self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.degree is not None and self.degree < 0:
            raise ValueError("degree must be non-negative")
        if self.fmt not in ("csv", "json"):
            raise ValueError("format must be csv or json")


# -- formatting ------------------------------------------------------------


def _num(x) -> float | str | None:
    if x is None:
        return None
    x = float(x)
    if math.isfinite(x):
        return x
    return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")


def _nums(a) -> list:
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        return _num(a)
    return [_nums(row) for row in a]


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def format_table(sol: Solution, fmt: str, meta: dict) -> str:
    ts, xs = sol.nodes()
    n = xs.shape[1]
    columns = ["t"] + [f"x_{i + 1}" for i in range(n)]
    if fmt == "json":
        rows = [[_num(t)] + [_num(v) for v in x] for t, x in zip(ts, xs)]
        return _dump_json({"columns": columns, "rows": rows, "metadata": meta})
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for t, x in zip(ts, xs):
        buf.write(",".join(format(float(v), ".17g") for v in (t, *x)) + "\n")
    return buf.getvalue()


def _emit(text: str, path: str | None, stream) -> None:
    if path is None:
        stream.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _partition_info(part) -> dict:
    return {
        "partition_points": [_num(p) for p in part.points],
        "steps": [mesh.steps for mesh in part.meshes],
    }


def _diagnostics(sol: Solution) -> dict:
    d = sol.diagnostics
    out = {
        "regular": d.regular,
        "refinements": d.refinements,
        "norm_inv_IG": _num(d.norm_inv_IG),
        "boundary_residual": _num(d.boundary_residual),
        "continuity_residual": _num(d.continuity_residual),
        "wellposedness_constant": _num(d.wellposedness_constant),
        "qstar_certified": d.qstar_certified,
        "epsilon_h": _num(d.epsilon_h),
        "gamma": _num(d.gamma),
        "notes": list(d.notes),
        "lambda": _nums(sol.lam),
        "mu": _nums(sol.mu),
    }
    out.update(_partition_info(sol.partition))
    return out


def _trace(trace: IterationTrace) -> dict:
    return {
        "epsilon": _num(trace.epsilon),
        "c_k": _num(trace.c_k),
        "q_estimate": _num(trace.q_estimate),
        "converged": trace.converged,
        "norm_fd": _num(trace.norm_fd),
        "bound_0": _num(trace.bound_history[0]) if trace.bound_history else None,
        "steps": [
            {"i": i, "delta": _num(delta), "bound": _num(trace.bound_history[i])}
            for i, delta in enumerate(trace.deltas, start=1)
        ],
    }


# -- commands --------------------------------------------------------------


def _options(loaded: LoadedConfig, cfg: RunConfig):
    opts = loaded.options
    changes = {
        "degree": cfg.degree,
        "h_max": cfg.h_max,
        "steps": cfg.steps,
        "tol": cfg.tol,
        "max_iter": cfg.max_iter,
        "max_refinements": cfg.max_refine,
    }
    changes = {k: v for k, v in changes.items() if v is not None}
    if cfg.h_max is not None and cfg.steps is None:
        changes["steps"] = None  # an explicit h_max wins over steps from the file
    return dataclasses.replace(opts, **changes)


def _load(cfg: RunConfig, report: dict):
    """Load and validate; returns (loaded, options) or an exit status."""
    try:
        loaded = load(cfg.config)
        opts = _options(loaded, cfg)
    except (ConfigError, ValueError) as exc:
        report["status"] = "PARSE_ERROR"
        report["error"] = exc.as_dict() if isinstance(exc, ConfigError) else {"message": str(exc)}
        return EXIT_PARSE
    findings = validate(loaded.problem)
    if findings:
        report["status"] = "PARSE_ERROR"
        report["error"] = {
            "message": "problem failed validation",
            "findings": [{"code": f.code, "message": f.message} for f in findings],
        }
        return EXIT_PARSE
    report["kernel"] = loaded.kind
    report["n"] = loaded.problem.n
    report["T"] = _num(loaded.problem.T)
    return loaded, opts


def _fail(report: dict, exc: Exception) -> int:
    if isinstance(exc, SolverError):
        report["status"] = exc.code
        report["error"] = {"message": str(exc), **{k: _num(v) if isinstance(v, float) else v
                                                 for k, v in exc.details.items()}}
        if isinstance(exc, NoConvergenceError) and exc.trace is not None:
            report["iteration"] = _trace(exc.trace)
        return exc.exit_status
    report["status"] = "EVALUATION_ERROR"
    report["error"] = {"message": str(exc)}
    return EXIT_EVAL


_RUNTIME_ERRORS = (SolverError, ExprDomainError, NonFiniteError, FloatingPointError)


def run_solve(cfg: RunConfig, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    report: dict = {"command": "solve"}
    status = _solve(cfg, report, stdout)
    _emit(_dump_json(report), cfg.report, stderr)
    return status


def _solve(cfg: RunConfig, report: dict, stdout) -> int:
    got = _load(cfg, report)
    if isinstance(got, int):
        return got
    loaded, opts = got
    p = loaded.problem
    try:
        if loaded.kind == "degenerate":
            sol = solve_degenerate(p, opts)
        else:
            sol, trace = solve_nondegenerate(p, opts.degree, opts)
            report["iteration"] = _trace(trace)
            report["degree"] = opts.degree
    except _RUNTIME_ERRORS as exc:
        return _fail(report, exc)
    report["status"] = "OK"
    report.update(_diagnostics(sol))
    meta = {"n": p.n, "T": _num(p.T), "kernel": loaded.kind, **_partition_info(sol.partition)}
    _emit(format_table(sol, cfg.fmt, meta), cfg.out, stdout)
    return EXIT_OK


def run_check(cfg: RunConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout
    report: dict = {"command": "check"}
    status = _check(cfg, report)
    _emit(_dump_json(report), cfg.report, stdout)
    return status


def _check(cfg: RunConfig, report: dict) -> int:
    got = _load(cfg, report)
    if isinstance(got, int):
        return got
    loaded, opts = got
    p = loaded.problem
    try:
        if loaded.kind == "general":
            approx = build_degenerate_approx(p.kernel, opts.degree, p.T, p.n)
            p = dataclasses.replace(p, kernel=approx.kernel)
            report["degree"] = opts.degree
            report["epsilon"] = _num(approx.epsilon)
        part = default_partition(p, opts)
        attempts = []
        for attempt in range(opts.max_refinements + 1):
            tables = build_tables(p, part, forcing=False)
            attempts.append({"m": part.m, "regular": tables.regular})
            if tables.regular:
                break
            if attempt < opts.max_refinements:
                part = refine_partition(part)
        report["attempts"] = attempts
        report["refinements"] = len(attempts) - 1
        report["regular"] = tables.regular
        report["G"] = _nums(tables.G)
        report.update(_partition_info(part))
        if not tables.regular:
            report["status"] = "NOT_REGULAR"
            return EXIT_NOT_REGULAR
        report["M"] = _nums(tables.M)
        report["norm_inv_IG"] = _num(tables.norm_inv)
        sys_ = assemble_param_system(p, part, tables)
        report["Q"] = _nums(sys_.Q)
        try:
            sys_.factor
        except SingularMatrixError as exc:
            report["status"] = "NOT_WELL_POSED"
            report["error"] = {"message": f"Q* is singular: {exc}"}
            return EXIT_NOT_WELL_POSED
        wp = wellposedness_diagnostics(p, part, tables, sys_, dataclasses.replace(opts, certify=True))
    except _RUNTIME_ERRORS as exc:
        return _fail(report, exc)
    report.update({
        "wellposedness_constant": _num(wp.N_constant),
        "qstar_certified": wp.qstar_certified,
        "epsilon_h": _num(wp.epsilon_h),
        "gamma": _num(wp.gamma),
        "notes": list(wp.notes),
    })
    if loaded.kind == "general":
        q = 1.25 * wp.N_constant * approx.epsilon
        report["q_estimate"] = _num(q)
        report["contraction"] = bool(q < 1.0)
    if not wp.qstar_certified:
        report["status"] = "NOT_WELL_POSED"
        report["error"] = {"message": "Q* invertibility not certified under mesh halving"}
        return EXIT_NOT_WELL_POSED
    report["status"] = "OK"
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpfide",
        description="Multipoint boundary value problems for Fredholm integro-differential equations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("solve", "solve the problem and write the solution table"),
                        ("check", "regularity and well-posedness diagnostics only")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, metavar="PATH", help="problem file")
        sp.add_argument("--report", metavar="PATH", help="JSON report path")
        if name == "solve":
            sp.add_argument("--out", metavar="PATH", help="solution table path (default stdout)")
            sp.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
        sp.add_argument("--degree", type=int, metavar="N", help="kernel approximation degree")
        sp.add_argument("--hmax", dest="h_max", type=float, metavar="X", help="maximum step size")
        sp.add_argument("--steps", type=int, metavar="N", help="fixed steps per subinterval")
        sp.add_argument("--tol", type=float, metavar="X", help="iteration tolerance")
        sp.add_argument("--max-iter", dest="max_iter", type=int, metavar="N")
        sp.add_argument("--max-refine", dest="max_refine", type=int, metavar="N")
    return parser


def main(argv=None) -> int:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    try:
        cfg = RunConfig(**args)
    except ValueError as exc:
        sys.stderr.write(_dump_json({"command": command, "status": "PARSE_ERROR",
                                     "error": {"message": str(exc)}}))
        return EXIT_PARSE
    if command == "solve":
        return run_solve(cfg)
    return run_check(cfg)


if __name__ == "__main__":
    sys.exit(main())
