import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpfide.corpus import ROTATION, rotation_kernel, worked_scalar, zero_kernel_constant
from mpfide.degsolve import (
    assemble_param_system,
    build_tables,
    check_regularity,
    prepare,
    recover_mu,
    reconstruct,
    refine_partition,
    rhs_function,
    solve_degenerate,
    solve_params,
    wellposedness_diagnostics,
)
from mpfide.densela import SingularMatrixError, max_norm
from mpfide.errors import NotRegularError, NotWellPosedError
from mpfide.model import (
    DegenerateKernel,
    MultipointCondition,
    Problem,
    SolverOptions,
    constant,
    make_partition,
)
from mpfide.refcheck import fundamental_tables, rank1_closed_form

ONE = constant([[1.0]])
ZERO = constant([[0.0]])


def scalar_problem(f=0.5, phi=1.0, a=0.0, b=(1.0, 1.0), d=1.0, points=(0.0, 1.0)):
    k = constant([[phi]])
    return Problem(1, points[-1], constant([[a]]), DegenerateKernel((k,), (ONE,)), constant([f]),
                   MultipointCondition(points, tuple([[bi]] for bi in b), [d]))


def zero_kernel_problem(m, b, d=(0.0,)):
    pts = tuple(np.linspace(0.0, 1.0, m + 1))
    return Problem(1, 1.0, ZERO, DegenerateKernel((ZERO,), (ZERO,)), constant([0.0]),
                   MultipointCondition(pts, tuple([[x]] for x in b), d))


# -- tables ----------------------------------------------------------------


def test_zero_kernel_tables():
    p = Problem(2, 1.0, constant(ROTATION), DegenerateKernel((constant(np.zeros((2, 2))),), (constant(np.eye(2)),)),
                constant([0.0, 0.0]), MultipointCondition((0.0, 1.0), (np.eye(2), np.eye(2)), [0.0, 0.0]))
    t = build_tables(p, make_partition((0.0, 1.0), steps=16))
    assert np.all(t.G == 0.0)
    np.testing.assert_array_equal(t.M, np.eye(2))
    assert t.regular and t.norm_inv == 1.0
    np.testing.assert_allclose(t.V, t.psi_hat_A, atol=0)


@pytest.mark.parametrize("f, g", [(1.0, 0.5), (0.5, 0.25)])
def test_worked_tables(f, g):
    t = build_tables(scalar_problem(f=f), make_partition((0.0, 1.0), steps=8))
    assert t.G[0, 0] == pytest.approx(0.5, abs=1e-15)
    assert t.M[0, 0] == pytest.approx(2.0, abs=1e-14)
    assert t.g[0, 0] == pytest.approx(g, abs=1e-15)


def test_two_subintervals_halve_g():
    t = build_tables(scalar_problem(), make_partition((0.0, 0.5, 1.0), steps=8))
    assert t.G[0, 0] == pytest.approx(0.25, abs=1e-15)


def test_table_block_identities(rotation):
    p, _ = rotation
    t = build_tables(p, make_partition(p.condition.points, steps=16))
    n, k = 2, 2
    for a in range(k):
        for j in range(k):
            np.testing.assert_allclose(t.G[a * n:(a + 1) * n, j * n:(j + 1) * n],
                                       t.psi_hat_phi[a, :, j].sum(axis=0), atol=1e-15)
    np.testing.assert_allclose(t.g, t.psi_hat_f.sum(axis=1), atol=1e-15)
    V = t.psi_hat_A + np.einsum("pjab,jrbc->prac", t.G_blocks, t.psi_hat)
    np.testing.assert_allclose(t.V, V, atol=1e-14)


@pytest.mark.parametrize(
    "G, regular, norm_inv",
    [(np.array([[0.5]]), True, 2.0), (np.eye(2), False, None), (np.zeros((3, 3)), True, 1.0)],
)
def test_check_regularity(G, regular, norm_inv):
    r = check_regularity(G)
    assert r.regular is regular
    if regular:
        assert r.norm_inv == pytest.approx(norm_inv, abs=1e-15)
    else:
        assert r.norm_inv is None


def test_regularity_scale_invariance():
    # I - G nearly singular relative to G's size
    assert not check_regularity(np.array([[1.0 + 1e-15]])).regular
    assert check_regularity(np.array([[1e6]])).regular


# -- parameter system ------------------------------------------------------


def test_worked_parameter_system():
    p = scalar_problem()
    part = make_partition((0.0, 1.0), steps=8)
    t = build_tables(p, part)
    sys = assemble_param_system(p, part, t)
    assert sys.D[0, 0, 0, 0] == pytest.approx(2.0, abs=1e-14)
    assert sys.F[0, 0] == pytest.approx(1.0, abs=1e-14)
    assert sys.Q[0, 0] == pytest.approx(4.0, abs=1e-14)
    assert sys.rhs[0] == pytest.approx(0.0, abs=1e-14)
    lam = solve_params(sys)
    assert lam[0, 0] == pytest.approx(0.0, abs=1e-14)
    mu = recover_mu(t, lam)
    assert mu[0, 0] == pytest.approx(0.5, abs=1e-14)
    fstar = rhs_function(p, t, lam, mu)
    for s in (0.0, 0.4, 1.0):
        assert fstar(s)[0] == pytest.approx(1.0, abs=1e-14)
    sol = reconstruct(p, part, lam, fstar, mu)
    ts, xs = sol.nodes()
    np.testing.assert_allclose(xs[:, 0], ts, atol=1e-12)
    assert sol.diagnostics.boundary_residual <= 1e-12


def test_zero_kernel_two_subintervals():
    p = zero_kernel_problem(2, (1.0, 0.0, 0.0), (3.0,))
    part = make_partition(p.condition.points, steps=4)
    sys = assemble_param_system(p, part, build_tables(p, part))
    assert np.all(sys.D == 0.0)
    np.testing.assert_array_equal(sys.Q, [[1.0, 0.0], [1.0, -1.0]])


def test_zero_kernel_single_subinterval():
    p = zero_kernel_problem(1, (2.0, 5.0))
    part = make_partition(p.condition.points, steps=4)
    sys = assemble_param_system(p, part, build_tables(p, part))
    np.testing.assert_array_equal(sys.Q, [[7.0]])


def test_identity_system():
    p = zero_kernel_problem(1, (1.0, 0.0), (4.5,))
    part = make_partition(p.condition.points, steps=2)
    sys = assemble_param_system(p, part, build_tables(p, part))
    np.testing.assert_array_equal(sys.Q, [[1.0]])
    assert solve_params(sys)[0, 0] == 4.5


def test_singular_parameter_system():
    p = zero_kernel_problem(1, (0.0, 0.0))
    part = make_partition(p.condition.points, steps=2)
    sys = assemble_param_system(p, part, build_tables(p, part))
    with pytest.raises(SingularMatrixError):
        solve_params(sys)


def test_recover_mu_without_forcing_or_parameters():
    p = scalar_problem(f=0.0)
    part = make_partition((0.0, 1.0), steps=8)
    t = build_tables(p, part)
    assert np.all(recover_mu(t, np.zeros((1, 1))) == 0.0)
    fstar = rhs_function(p, t, np.zeros((1, 1)), np.zeros((1, 1)))
    assert fstar(0.3)[0] == 0.0


def test_zero_kernel_mu_is_g():
    p = zero_kernel_problem(2, (1.0, 0.0, 0.0), (3.0,))
    part = make_partition(p.condition.points, steps=4)
    t = build_tables(p, part)
    np.testing.assert_array_equal(recover_mu(t, np.array([[1.0], [2.0]])), t.g)


@pytest.mark.parametrize(
    "points, expected",
    [
        ((0.0, 1.0), (0.0, 0.5, 1.0)),
        ((0.0, 1.0, 3.0), (0.0, 0.5, 1.0, 2.0, 3.0)),
    ],
)
def test_refine_partition(points, expected):
    assert refine_partition(make_partition(points)).points == expected


def test_refine_partition_twice():
    part = refine_partition(refine_partition(make_partition((0.0, 1.0), steps=4)))
    assert part.points == (0.0, 0.25, 0.5, 0.75, 1.0)
    assert all(mesh.steps == 4 for mesh in part.meshes)


# -- driver ----------------------------------------------------------------


def test_worked_case_solution():
    sol = solve_degenerate(worked_scalar(), SolverOptions(steps=8))
    assert sol.lam[0, 0] == pytest.approx(0.0, abs=1e-14)
    ts, xs = sol.nodes()
    assert np.max(np.abs(xs[:, 0] - ts)) <= 1e-12
    assert sol.diagnostics.qstar_certified is True


def test_zero_kernel_constant_solution():
    sol = solve_degenerate(zero_kernel_constant(2.0, m=3), SolverOptions(steps=4))
    _, xs = sol.nodes()
    assert np.all(xs == 2.0)


def test_rotation_solution(rotation):
    p, xstar = rotation
    sol = solve_degenerate(p, SolverOptions(steps=32))
    ts, xs = sol.nodes()
    err = max(max_norm(x - xstar(t)) for t, x in zip(ts, xs))
    assert err <= 1e-7
    assert sol.diagnostics.continuity_residual <= 1e-12
    assert sol.diagnostics.boundary_residual <= 1e-12


def test_not_well_posed():
    with pytest.raises(NotWellPosedError):
        solve_degenerate(zero_kernel_problem(1, (0.0, 0.0)), SolverOptions(steps=4))


def test_not_regular_after_refinement_cap():
    # rank-1 kernel with G equal to 1 on [0, 1]
    r2 = constant([[math.sqrt(2.0)]])
    p = Problem(1, 1.0, ZERO, DegenerateKernel((r2,), (r2,)), constant([1.0]),
                MultipointCondition((0.0, 1.0), ([[1.0]], [[1.0]]), [2.0]))
    with pytest.raises(NotRegularError):
        prepare(p, SolverOptions(steps=8, max_refinements=0))
    prep = prepare(p, SolverOptions(steps=8, max_refinements=2))
    assert prep.refinements == 1 and prep.partition.m == 2
    sol = solve_degenerate(p, SolverOptions(steps=8))
    ts, xs = sol.nodes()
    np.testing.assert_allclose(xs[:, 0], 3.0 * ts - 0.5, atol=1e-12)


def test_matches_closed_form_on_rank1_problems():
    for a, phi, f, b, d in [(0.0, 1.0, 0.5, (1.0, 1.0), 1.0), (0.7, 0.4, 1.0, (1.0, 2.0), -1.0),
                            (-1.3, 2.0, -0.3, (0.5, 1.0), 2.0)]:
        p = scalar_problem(f=f, phi=phi, a=a, b=b, d=d)
        for steps in (16, 32):
            sol = solve_degenerate(p, SolverOptions(steps=steps))
            ref = rank1_closed_form(p, sol.partition)
            err = max(np.max(np.abs(g.values - r.values)) for g, r in zip(sol.grid, ref.grid))
            if steps == 16:
                coarse = err
        # ten times the mesh error estimated from two resolutions
        assert err <= 10 * max(abs(coarse - err), 1e-13)


# -- well-posedness --------------------------------------------------------


def test_wellposedness_zero_kernel():
    p = zero_kernel_problem(2, (1.0, 0.0, 0.0), (3.0,))
    part = make_partition(p.condition.points, steps=4)
    t = build_tables(p, part)
    sys = assemble_param_system(p, part, t)
    wp = wellposedness_diagnostics(p, part, t, sys)
    assert wp.alpha == 0.0
    assert math.isfinite(wp.N_constant) and wp.N_constant > 0
    assert wp.qstar_certified is True and wp.epsilon_h == 0.0


def test_wellposedness_worked_case_certified():
    p = worked_scalar()
    for steps in (8, 16, 64):
        part = make_partition((0.0, 1.0), steps=steps)
        t = build_tables(p, part)
        wp = wellposedness_diagnostics(p, part, t, assemble_param_system(p, part, t))
        assert wp.qstar_certified is True
        assert wp.gamma * wp.epsilon_h < 1.0


def test_not_regular_has_no_system():
    p = Problem(1, 1.0, ZERO, DegenerateKernel((constant([[math.sqrt(2.0)]]),), (constant([[math.sqrt(2.0)]]),)),
                constant([1.0]), MultipointCondition((0.0, 1.0), ([[1.0]], [[1.0]]), [2.0]))
    part = make_partition((0.0, 1.0), steps=8)
    t = build_tables(p, part)
    assert not t.regular and t.M is None
    with pytest.raises(NotRegularError):
        assemble_param_system(p, part, t)


def test_solution_bound_on_corpus(rotation):
    problems = [worked_scalar(), zero_kernel_constant(), rotation[0],
                scalar_problem(a=0.7, phi=0.4, f=1.0, b=(1.0, 2.0), d=-1.0)]
    for p in problems:
        sol = solve_degenerate(p, SolverOptions(steps=16))
        nodes = sol.partition.all_nodes()
        fmax = max(max_norm(p.f_fn(float(t))) for t in nodes)
        data = max(fmax, max_norm(p.condition.d))
        assert sol.max_norm() <= sol.diagnostics.wellposedness_constant * data


# -- invariants ------------------------------------------------------------


def test_fundamental_matrix_independence(rotation, rng):
    p, _ = rotation
    part = make_partition(p.condition.points, steps=64)
    t = build_tables(p, part)
    seeds = [rng.normal(size=(2, 2)) + 2 * np.eye(2) for _ in range(part.m)]
    G, V = fundamental_tables(p, part, seeds)
    np.testing.assert_allclose(G, t.G_blocks, atol=1e-8)
    np.testing.assert_allclose(V, t.V, atol=1e-8)


def _parameter_residual(p, xstar, steps):
    part = make_partition(p.condition.points, steps=steps)
    t = build_tables(p, part)
    sys = assemble_param_system(p, part, t)
    lam = np.concatenate([xstar(s) for s in part.points[:-1]])
    return max_norm(sys.Q @ lam - sys.rhs), part.meshes[0].h


def test_true_parameters_satisfy_system(rotation):
    p, xstar = rotation
    consts = []
    for steps in (8, 16, 32):
        res, h = _parameter_residual(p, xstar, steps)
        consts.append(res / h**4)
    assert all(0.5 <= c1 / c0 <= 2.0 for c0, c1 in zip(consts, consts[1:])), consts


def test_continuity_at_interior_points(rotation):
    p, _ = rotation
    sol = solve_degenerate(p, SolverOptions(steps=16))
    for q in range(1, sol.partition.m):
        assert max_norm(sol.grid[q - 1].end - sol.lam[q]) <= 1e-11


vec2 = st.tuples(st.floats(-2, 2), st.floats(-2, 2))


@settings(max_examples=15, deadline=None)
@given(vec2, vec2, vec2, vec2)
def test_solution_linear_in_data(f1, f2, d1, d2):
    base = Problem(2, 2.0, constant(ROTATION), rotation_kernel(), None,
                   MultipointCondition((0.0, 1.0, 2.0), (np.eye(2), np.diag([0.5, -1.0]), [[0.0, 1.0], [1.0, 0.0]]), [0.0, 0.0]))

    def with_data(f, d):
        fn = lambda t: np.array([f[0] * math.cos(t), f[1] * t])  # noqa: E731
        return dataclasses.replace(base, f_fn=fn, condition=dataclasses.replace(base.condition, d=np.array(d)))

    opts = SolverOptions(steps=8, certify=False)
    s1 = solve_degenerate(with_data(f1, d1), opts)
    s2 = solve_degenerate(with_data(f2, d2), opts)
    s12 = solve_degenerate(with_data(np.add(f1, f2), np.add(d1, d2)), opts)
    for a, b, c in zip(s1.grid, s2.grid, s12.grid):
        np.testing.assert_allclose(c.values, a.values + b.values, atol=1e-9)
