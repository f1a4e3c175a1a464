"""Reference problems with known solutions, shared by tests and scripts."""

from __future__ import annotations

import numpy as np

from .model import (
    DegenerateKernel,
    GeneralKernel,
    MultipointCondition,
    Problem,
    constant,
    manufacture,
)

ROTATION = np.array([[0.0, 1.0], [-1.0, 0.0]])


def worked_scalar() -> Problem:
    """x' = int_0^1 x + 1/2,  x(0) + x(1) = 1; solution x(t) = t."""
    one = constant([[1.0]])
    return Problem(
        1, 1.0, constant([[0.0]]), DegenerateKernel((one,), (one,)), constant([0.5]),
        MultipointCondition((0.0, 1.0), ([[1.0]], [[1.0]]), [1.0]),
    )


def zero_kernel_constant(c: float = 2.0, m: int = 2) -> Problem:
    """x' = 0 with x(0) = c, condition points split [0, 1] evenly."""
    zero = constant([[0.0]])
    pts = tuple(np.linspace(0.0, 1.0, m + 1))
    b = [[[1.0]]] + [[[0.0]]] * m
    return Problem(1, 1.0, zero, DegenerateKernel((zero,), (zero,)), constant([0.0]),
                   MultipointCondition(pts, b, [c]))


def rotation_kernel() -> DegenerateKernel:
    """A rank-2 polynomial kernel on R^2."""
    phi1 = lambda t: np.array([[0.5, 0.0], [0.0, 0.25 * t]])  # noqa: E731
    psi1 = lambda s: np.array([[s, 0.0], [0.2, 0.0]])  # noqa: E731
    phi2 = lambda t: np.array([[0.0, 0.2 * t * t], [0.1, 0.0]])  # noqa: E731
    psi2 = lambda s: np.array([[0.0, 0.3], [1.0 - 0.5 * s, 0.0]])  # noqa: E731
    return DegenerateKernel((phi1, phi2), (psi1, psi2))


def rotation_problem(T: float = 2.0) -> tuple[Problem, callable]:
    """n = 2, A = rotation, x* = (sin t, cos t), condition at 0, T/2, T."""
    xstar = lambda t: np.array([np.sin(t), np.cos(t)])  # noqa: E731
    dxstar = lambda t: np.array([np.cos(t), -np.sin(t)])  # noqa: E731
    b = [np.eye(2), np.array([[0.5, 0.0], [0.0, -1.0]]), np.array([[0.0, 1.0], [1.0, 0.0]])]
    p = manufacture(xstar, dxstar, constant(ROTATION), rotation_kernel(), (0.0, T / 2, T), b)
    return p, xstar


def exp_kernel_problem(amplitude: float = 1.0) -> tuple[Problem, callable]:
    """K = amplitude * e^{t tau} on [0, 1], A = 0, x* = 1, condition x(0) = 1."""

    def f(t):
        # -amplitude * int_0^1 e^{t tau} dtau
        return np.array([-amplitude * (np.expm1(t) / t if t != 0.0 else 1.0)])

    p = Problem(
        1, 1.0, constant([[0.0]]),
        GeneralKernel(lambda t, s: np.array([[amplitude * np.exp(t * s)]])), f,
        MultipointCondition((0.0, 1.0), ([[1.0]], [[0.0]]), [1.0]),
    )
    return p, lambda t: np.array([1.0])


def separable_general_problem() -> tuple[Problem, callable]:
    """K = t tau given as a general kernel, x* = 1 + t, x(0) + x(1) = 3."""
    kern = GeneralKernel(lambda t, s: np.array([[t * s]]))
    xstar = lambda t: np.array([1.0 + t])  # noqa: E731
    # int_0^1 tau (1 + tau) dtau = 5/6
    f = lambda t: np.array([1.0 - 5.0 * t / 6.0])  # noqa: E731
    return Problem(1, 1.0, constant([[0.0]]), kern, f,
                   MultipointCondition((0.0, 1.0), ([[1.0]], [[1.0]]), [3.0])), xstar
