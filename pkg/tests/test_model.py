import math

import numpy as np
import pytest

from mpfide.corpus import ROTATION, worked_scalar
from mpfide.model import (
    DegenerateKernel,
    GeneralKernel,
    MultipointCondition,
    Problem,
    constant,
    make_partition,
    manufacture,
    validate,
)

ONE = constant([[1.0]])
ZERO2 = constant(np.zeros((2, 2)))


def codes(p):
    return {f.code for f in validate(p)}


def scalar(points=(0.0, 1.0), b=([[1.0]], [[1.0]]), d=(1.0,), T=1.0, f=constant([0.5]), kernel=None):
    kernel = kernel or DegenerateKernel((ONE,), (ONE,))
    return Problem(1, T, constant([[0.0]]), kernel, f, MultipointCondition(points, b, d))


def test_well_formed_problem_has_no_findings():
    assert validate(worked_scalar()) == []


@pytest.mark.parametrize(
    "problem, code",
    [
        (scalar(points=(0.0, 0.6, 0.4, 1.0), b=([[1.0]],) * 4), "NONMONOTONE_POINTS"),
        (scalar(points=(0.1, 1.0)), "ENDPOINT_MISMATCH"),
        (scalar(points=(0.0, 0.9)), "ENDPOINT_MISMATCH"),
        (scalar(points=(0.0,), b=([[1.0]],)), "TOO_FEW_POINTS"),
        (scalar(b=([[1.0]],)), "CONDITION_COUNT"),
        (scalar(b=([[1.0, 2.0]], [[1.0]])), "SHAPE_MISMATCH"),
        (scalar(d=(1.0, 2.0)), "SHAPE_MISMATCH"),
        (scalar(b=([[np.inf]], [[1.0]])), "NONFINITE_VALUE"),
        (scalar(T=-1.0), "NONPOSITIVE_HORIZON"),
        (scalar(f=lambda t: np.array([1.0 / (t - 0.5) if t != 0.5 else np.nan])), "NONFINITE_VALUE"),
        (scalar(f=lambda t: np.array([1.0, 2.0])), "SHAPE_MISMATCH"),
        (scalar(f=lambda t: 1 / 0), "EVALUATION_ERROR"),
        (scalar(kernel=DegenerateKernel((), ())), "EMPTY_KERNEL"),
        (scalar(kernel="not a kernel"), "BAD_KERNEL"),
    ],
)
def test_validate_findings(problem, code):
    assert code in codes(problem)


def test_validate_shape_mismatch_for_rectangular_b():
    p = Problem(2, 1.0, ZERO2, DegenerateKernel((ZERO2,), (ZERO2,)), constant([0.0, 0.0]),
                MultipointCondition((0.0, 1.0), (np.ones((2, 3)), np.eye(2)), [0.0, 0.0]))
    assert "SHAPE_MISMATCH" in codes(p)


def test_validate_never_raises_on_garbage():
    p = Problem("x", None, None, None, None, MultipointCondition((0.0, 1.0), ([[1.0]], [[1.0]]), [1.0]))
    assert codes(p) == {"BAD_HEADER"}
    p = Problem(0, 1.0, None, None, None, MultipointCondition((0.0, 1.0), ([[1.0]], [[1.0]]), [1.0]))
    assert codes(p) == {"BAD_DIMENSION"}


def test_validate_general_kernel_probes():
    bad = GeneralKernel(lambda t, s: np.array([[1.0 / s]]))
    assert "EVALUATION_ERROR" in codes(scalar(kernel=bad)) or "NONFINITE_VALUE" in codes(scalar(kernel=bad))


def test_manufacture_worked_scalar():
    p = manufacture(lambda t: np.array([t]), lambda t: np.array([1.0]), constant([[0.0]]),
                    DegenerateKernel((ONE,), (ONE,)), (0.0, 1.0), ([[1.0]], [[1.0]]))
    for t in (0.0, 0.3, 1.0):
        assert p.f_fn(t)[0] == pytest.approx(0.5, abs=1e-14)
    np.testing.assert_allclose(p.condition.d, [1.0])


def test_manufacture_zero_solution():
    p = manufacture(lambda t: np.zeros(2), lambda t: np.zeros(2), ZERO2,
                    GeneralKernel(lambda t, s: np.array([[t, s], [1.0, t * s]])), (0.0, 0.5, 1.0),
                    (np.eye(2),) * 3)
    for t in (0.0, 0.7):
        assert np.all(p.f_fn(t) == 0.0)
    assert np.all(p.condition.d == 0.0)


def test_manufacture_rotation_zero_kernel():
    p = manufacture(lambda t: np.array([math.sin(t), math.cos(t)]),
                    lambda t: np.array([math.cos(t), -math.sin(t)]), constant(ROTATION),
                    DegenerateKernel((ZERO2,), (ZERO2,)), (0.0, 2.0), (np.eye(2), np.eye(2)))
    for t in np.linspace(0.0, 2.0, 5):
        np.testing.assert_allclose(p.f_fn(t), 0.0, atol=1e-15)


def test_manufacture_general_kernel_integral():
    # int_0^1 t tau (1 + tau) dtau = 5 t / 6
    p = manufacture(lambda t: np.array([1.0 + t]), lambda t: np.array([1.0]), constant([[0.0]]),
                    GeneralKernel(lambda t, s: np.array([[t * s]])), (0.0, 1.0), ([[1.0]], [[1.0]]))
    assert p.f_fn(0.6)[0] == pytest.approx(1.0 - 0.5, abs=1e-13)
    np.testing.assert_allclose(p.condition.d, [3.0])


def test_partition_defaults():
    part = make_partition((0.0, 0.5, 2.0))
    assert part.points == (0.0, 0.5, 2.0)
    assert part.m == 2 and part.T == 2.0
    # default h_max = T / (64 m)
    assert [mesh.steps for mesh in part.meshes] == [32, 96]
    nodes = part.all_nodes()
    assert nodes[0] == 0.0 and nodes[-1] == 2.0
    assert [mesh.steps for mesh in part.doubled().meshes] == [64, 192]


def test_partition_fixed_steps():
    part = make_partition((0.0, 1.0, 3.0), steps=8)
    assert [mesh.steps for mesh in part.meshes] == [8, 8]
