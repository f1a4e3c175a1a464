"""RK4 stepping of subinterval Cauchy problems and composite Simpson
quadrature on the same uniform grids.

Everything works on stacked ndarrays: a grid function over ``steps + 1``
nodes with ``(n,)`` or ``(n, c)`` values is an array of shape
``(steps + 1, n)`` or ``(steps + 1, n, c)``.  Matrix right-hand sides are
stepped as whole matrices, so one sweep integrates every column at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

MatrixFn = Callable[[float], np.ndarray]


class NonFiniteError(FloatingPointError):
    def __init__(self, t: float):
        self.t = t
        super().__init__(f"non-finite value encountered at t = {t!r}")


@dataclass(frozen=True)
class SubintervalMesh:
    left: float
    right: float
    steps: int

    def __post_init__(self):
        if not self.left < self.right:
            raise ValueError(f"empty subinterval [{self.left}, {self.right}]")
        if self.steps <= 0 or self.steps % 2:
            raise ValueError(f"steps must be a positive even integer, got {self.steps}")

    @property
    def h(self) -> float:
        return (self.right - self.left) / self.steps

    @property
    def nodes(self) -> np.ndarray:
        nodes = self.left + self.h * np.arange(self.steps + 1)
        nodes[-1] = self.right
        return nodes

    @property
    def midpoints(self) -> np.ndarray:
        return self.left + self.h * (np.arange(self.steps) + 0.5)

    def refined(self) -> "SubintervalMesh":
        return SubintervalMesh(self.left, self.right, 2 * self.steps)


def steps_for(length: float, h_max: float) -> int:
    """Smallest even step count with ``length / steps <= h_max``."""
    steps = max(2, math.ceil(length / h_max - 1e-9))
    return steps + steps % 2


@dataclass(frozen=True)
class GridFunction:
    mesh: SubintervalMesh
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape[0] != self.mesh.steps + 1:
            raise ValueError("grid function needs one value per mesh node")

    @property
    def nodes(self) -> np.ndarray:
        return self.mesh.nodes

    @property
    def end(self) -> np.ndarray:
        return self.values[-1]


def sample(fn: Callable[[float], np.ndarray], times) -> np.ndarray:
    """Evaluate ``fn`` at each time and stack the results."""
    return np.stack([np.asarray(fn(float(t)), dtype=float) for t in times])


def rk4_ivp(a_fn: MatrixFn, p_fn: MatrixFn, mesh: SubintervalMesh, x0) -> GridFunction:
    """Classical RK4 for ``x' = A(t) x + P(t)``, ``x(left) = x0``."""
    nodes = mesh.nodes
    mids = mesh.midpoints
    h = mesh.h
    a_nodes = sample(a_fn, nodes)
    a_mids = sample(a_fn, mids)
    p_nodes = sample(p_fn, nodes)
    p_mids = sample(p_fn, mids)

    x = np.array(x0, dtype=float)
    if x.shape != p_nodes.shape[1:]:
        raise ValueError(f"initial value shape {x.shape} does not match P shape {p_nodes.shape[1:]}")
    out = np.empty((mesh.steps + 1,) + x.shape)
    out[0] = x
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(mesh.steps):
            k1 = a_nodes[i] @ x + p_nodes[i]
            k2 = a_mids[i] @ (x + 0.5 * h * k1) + p_mids[i]
            k3 = a_mids[i] @ (x + 0.5 * h * k2) + p_mids[i]
            k4 = a_nodes[i + 1] @ (x + h * k3) + p_nodes[i + 1]
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(x)):
                raise NonFiniteError(float(nodes[i + 1]))
            out[i + 1] = x
    return GridFunction(mesh, out)


def rk4_cauchy(a_fn: MatrixFn, p_fn: MatrixFn, mesh: SubintervalMesh) -> GridFunction:
    """RK4 trajectory of ``x' = A(t) x + P(t)`` from a zero initial state.

    ``P`` may be a vector or a matrix; the result has the same value shape.
    """
    shape = np.shape(p_fn(float(mesh.left)))
    return rk4_ivp(a_fn, p_fn, mesh, np.zeros(shape))


def simpson_weights(mesh: SubintervalMesh) -> np.ndarray:
    if mesh.steps % 2:
        raise ValueError("composite Simpson needs an even number of steps")
    w = np.ones(mesh.steps + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (mesh.h / 3.0)


def simpson(weight_fn: MatrixFn | None, g: GridFunction) -> np.ndarray:
    """Composite Simpson approximation of the integral of ``weight(t) @ g(t)``.

    ``weight_fn=None`` integrates ``g`` itself.
    """
    w = simpson_weights(g.mesh)
    vals = g.values
    if weight_fn is not None:
        wt = sample(weight_fn, g.nodes)
        if wt.shape[-1] != vals.shape[1]:
            raise ValueError(
                f"weight shape {wt.shape[1:]} incompatible with values {vals.shape[1:]}"
            )
        vals = np.matmul(wt, vals) if vals.ndim == 3 else np.einsum("iab,ib->ia", wt, vals)
    return np.tensordot(w, vals, axes=(0, 0))
