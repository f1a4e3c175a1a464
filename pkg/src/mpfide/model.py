"""Problem, kernel, partition and solution data model.

The problem is

    x'(t) = A(t) x(t) + int_0^T K(t, tau) x(tau) dtau + f(t),   t in (0, T),
    sum_i B_i x(t_i) = d,

with ``0 = t_0 < t_1 < ... < t_m = T``.  Coefficient functions are plain
callables of a float returning ndarrays: ``A(t)`` and the kernel terms are
``(n, n)``, ``f(t)`` is ``(n,)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence, Union

import numpy as np

from .odequad import SubintervalMesh, GridFunction, simpson_weights, steps_for

MatrixFn = Callable[[float], np.ndarray]
VectorFn = Callable[[float], np.ndarray]

MANUFACTURE_PANELS = 2048


def constant(value) -> Callable[[float], np.ndarray]:
    """A constant coefficient function returning a copy of ``value``."""
    arr = np.array(value, dtype=float)
    return lambda t: arr.copy()


@dataclass(frozen=True)
class DegenerateKernel:
    """Separable kernel ``sum_j phi_j(t) @ psi_j(tau)`` of rank ``k``."""

    phi: tuple[MatrixFn, ...]
    psi: tuple[MatrixFn, ...]

    def __post_init__(self):
        object.__setattr__(self, "phi", tuple(self.phi))
        object.__setattr__(self, "psi", tuple(self.psi))
        if len(self.phi) != len(self.psi):
            raise ValueError("phi and psi must have the same length")

    @property
    def k(self) -> int:
        return len(self.phi)

    def __call__(self, t: float, tau: float) -> np.ndarray:
        return sum(np.asarray(p(t)) @ np.asarray(q(tau)) for p, q in zip(self.phi, self.psi))


@dataclass(frozen=True)
class GeneralKernel:
    fn: Callable[[float, float], np.ndarray]

    def __call__(self, t: float, tau: float) -> np.ndarray:
        return np.asarray(self.fn(t, tau), dtype=float)


Kernel = Union[DegenerateKernel, GeneralKernel]


@dataclass(frozen=True)
class MultipointCondition:
    """``sum_i b[i] @ x(points[i]) = d``."""

    points: tuple[float, ...]
    b: tuple[np.ndarray, ...]
    d: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(float(p) for p in self.points))
        object.__setattr__(self, "b", tuple(np.array(B, dtype=float) for B in self.b))
        object.__setattr__(self, "d", np.array(self.d, dtype=float))


@dataclass(frozen=True)
class Problem:
    n: int
    T: float
    a_fn: MatrixFn
    kernel: Kernel
    f_fn: VectorFn
    condition: MultipointCondition


@dataclass
class SolverOptions:
    h_max: float | None = None  # default T / (64 m)
    steps: int | None = None  # fixed steps per subinterval; overrides h_max
    max_refinements: int = 6
    degree: int = 6
    max_iter: int = 50
    tol: float = 1e-10
    certify: bool = True

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.degree < 0:
            raise ValueError("degree must be non-negative")
        if self.steps is not None and (self.steps <= 0 or self.steps % 2):
            raise ValueError("steps must be a positive even integer")


@dataclass(frozen=True)
class Partition:
    points: tuple[float, ...]
    meshes: tuple[SubintervalMesh, ...]
    h_max: float | None = None
    steps: int | None = None

    @property
    def m(self) -> int:
        return len(self.meshes)

    @property
    def T(self) -> float:
        return self.points[-1]

    def all_nodes(self) -> np.ndarray:
        return np.concatenate([mesh.nodes for mesh in self.meshes])

    def doubled(self) -> "Partition":
        """Same points, every mesh with twice the steps."""
        return Partition(
            self.points,
            tuple(mesh.refined() for mesh in self.meshes),
            None if self.h_max is None else self.h_max / 2,
            None if self.steps is None else 2 * self.steps,
        )


def make_partition(points: Sequence[float], h_max: float | None = None,
                   steps: int | None = None) -> Partition:
    points = tuple(float(p) for p in points)
    m = len(points) - 1
    if m < 1:
        raise ValueError("a partition needs at least two points")
    if steps is None and h_max is None:
        h_max = (points[-1] - points[0]) / (64 * m)
    meshes = []
    for left, right in zip(points[:-1], points[1:]):
        mr = steps if steps is not None else steps_for(right - left, h_max)
        meshes.append(SubintervalMesh(left, right, mr))
    return Partition(points, tuple(meshes), h_max, steps)


def default_partition(p: Problem, opts: SolverOptions | None = None) -> Partition:
    """Partition at the multipoint-condition points."""
    opts = opts or SolverOptions()
    return make_partition(p.condition.points, opts.h_max, opts.steps)


@dataclass
class Diagnostics:
    regular: bool = False
    norm_inv_IG: float | None = None
    boundary_residual: float | None = None
    continuity_residual: float | None = None
    wellposedness_constant: float | None = None
    qstar_certified: bool | None = None
    epsilon_h: float | None = None
    gamma: float | None = None
    refinements: int = 0
    notes: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class Solution:
    partition: Partition
    lam: np.ndarray  # (m, n): value at the left end of each subinterval
    mu: np.ndarray  # (k, n)
    grid: tuple[GridFunction, ...]
    diagnostics: Diagnostics

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Node times and values on [0, T], one value per distinct time.

        At interior partition points the value of the right subinterval is
        kept (``x(t_r) = lambda_{r+1}``); the final node supplies ``x(T)``.
        """
        ts, xs = [], []
        last = len(self.grid) - 1
        for r, g in enumerate(self.grid):
            stop = None if r == last else -1
            ts.append(g.nodes[:stop])
            xs.append(g.values[:stop])
        return np.concatenate(ts), np.concatenate(xs)

    def max_norm(self) -> float:
        """``max_t ||x(t)||`` over all grid nodes, both sides of each joint."""
        return max(float(np.max(np.abs(g.values))) for g in self.grid)

    def value_at_point(self, q: int) -> np.ndarray:
        """Value at partition point ``t_q``."""
        if q < self.partition.m:
            return self.lam[q]
        return self.grid[-1].end


# -- validation ------------------------------------------------------------


@dataclass(frozen=True)
class Finding:
    code: str
    message: str


def _probe_times(T: float) -> list[float]:
    return [0.0, 0.25 * T, 0.5 * T, 0.75 * T, T]


def validate(p: Problem) -> list[Finding]:
    """Check the problem's type invariants; never raises."""
    out: list[Finding] = []

    def add(code, msg):
        out.append(Finding(code, msg))

    try:
        n, T = int(p.n), float(p.T)
    except Exception as exc:  # noqa: BLE001
        return [Finding("BAD_HEADER", f"n/T not numeric: {exc}")]
    if n < 1:
        add("BAD_DIMENSION", f"n must be positive, got {n}")
        return out
    if not (math.isfinite(T) and T > 0):
        add("NONPOSITIVE_HORIZON", f"T must be positive and finite, got {T}")
        return out

    cond = p.condition
    pts = list(cond.points)
    if len(pts) < 2:
        add("TOO_FEW_POINTS", "the condition needs at least the points 0 and T")
    if any(b <= a for a, b in zip(pts[:-1], pts[1:])):
        add("NONMONOTONE_POINTS", f"condition points not strictly increasing: {pts}")
    if pts and (pts[0] != 0.0 or not math.isclose(pts[-1], T, rel_tol=1e-12)):
        add("ENDPOINT_MISMATCH", f"condition points must start at 0 and end at T={T}")
    if len(cond.b) != len(pts):
        add("CONDITION_COUNT", f"{len(pts)} points but {len(cond.b)} matrices B_i")
    for i, B in enumerate(cond.b):
        if B.shape != (n, n):
            add("SHAPE_MISMATCH", f"B_{i} has shape {B.shape}, expected {(n, n)}")
        elif not np.all(np.isfinite(B)):
            add("NONFINITE_VALUE", f"B_{i} has non-finite entries")
    if cond.d.shape != (n,):
        add("SHAPE_MISMATCH", f"d has shape {cond.d.shape}, expected {(n,)}")

    def check_fn(name, fn, shape, *args):
        try:
            v = np.asarray(fn(*args), dtype=float)
        except Exception as exc:  # noqa: BLE001
            add("EVALUATION_ERROR", f"{name}{args}: {exc}")
            return
        if v.shape != shape:
            add("SHAPE_MISMATCH", f"{name} has shape {v.shape}, expected {shape}")
        elif not np.all(np.isfinite(v)):
            add("NONFINITE_VALUE", f"{name}{args} is not finite")

    probes = _probe_times(T)
    for t in probes:
        check_fn("A", p.a_fn, (n, n), t)
        check_fn("f", p.f_fn, (n,), t)
    kern = p.kernel
    if isinstance(kern, DegenerateKernel):
        if kern.k < 1:
            add("EMPTY_KERNEL", "degenerate kernel needs rank k >= 1")
        for j, (phi, psi) in enumerate(zip(kern.phi, kern.psi), start=1):
            for t in probes:
                check_fn(f"phi_{j}", phi, (n, n), t)
                check_fn(f"psi_{j}", psi, (n, n), t)
    elif isinstance(kern, GeneralKernel):
        for t in probes:
            for tau in probes[::2]:
                check_fn("K", kern, (n, n), t, tau)
    else:
        add("BAD_KERNEL", f"unsupported kernel type {type(kern).__name__}")
    # repeated codes from the probe sweep add nothing
    seen, unique = set(), []
    for f in out:
        if (f.code, f.message) not in seen:
            seen.add((f.code, f.message))
            unique.append(f)
    return unique


# -- manufactured problems -------------------------------------------------


def manufacture(xstar: VectorFn, dxstar: VectorFn, a_fn: MatrixFn, kernel: Kernel,
                points: Sequence[float], b: Sequence, panels: int = MANUFACTURE_PANELS) -> Problem:
    """Build the problem whose exact solution is ``xstar``.

    ``f(t) = x*'(t) - A(t) x*(t) - int_0^T K(t, tau) x*(tau) dtau`` with the
    integral by composite Simpson on ``panels`` panels, and
    ``d = sum_i B_i x*(t_i)``.
    """
    points = tuple(float(p) for p in points)
    T = points[-1]
    x0 = np.atleast_1d(np.asarray(xstar(0.0), dtype=float))
    n = x0.shape[0]
    mesh = SubintervalMesh(0.0, T, panels)
    taus = mesh.nodes
    w = simpson_weights(mesh)
    xs = np.stack([np.asarray(xstar(float(s)), dtype=float) for s in taus])

    if isinstance(kernel, DegenerateKernel):
        moments = [
            np.einsum("i,iab,ib->a", w, np.stack([np.asarray(q(float(s))) for s in taus]), xs)
            for q in kernel.psi
        ]

        def integral(t):
            return sum(np.asarray(p(t)) @ mom for p, mom in zip(kernel.phi, moments))
    else:
        @lru_cache(maxsize=None)
        def integral(t):
            ks = np.stack([kernel(t, float(s)) for s in taus])
            return np.einsum("i,iab,ib->a", w, ks, xs)

    def f_fn(t):
        t = float(t)
        return (np.asarray(dxstar(t), dtype=float) - np.asarray(a_fn(t)) @ np.asarray(xstar(t), dtype=float)
                - integral(t))

    bs = tuple(np.array(B, dtype=float).reshape(n, n) for B in b)
    d = sum(B @ np.asarray(xstar(t), dtype=float) for B, t in zip(bs, points))
    return Problem(n, T, a_fn, kernel, f_fn, MultipointCondition(points, bs, d))
