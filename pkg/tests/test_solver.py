"""Tests for the policy-iteration Dirichlet solver."""

import numpy as np
import pytest

from envma import matrixcore as mc
from envma.envelope import ThetaBox
from envma.solver import (
    GridSpec,
    ScalarField,
    builtin_solution,
    check_premises,
    convergence_study,
    discrete_hessian,
    hessian_stack,
    residual_field,
    solve_dirichlet,
    transfinite_interpolation,
)


def make_grid_1(points=9, lo=(-1.0, -1.0), hi=(1.0, 1.0)):
    return GridSpec(1, lo, hi, points)


def field_of(grid, fn):
    return ScalarField.from_function(grid, fn)


class TestGridSpec:
    def test_spacing(self):
        grid = GridSpec(1, (0.0, 0.0), (1.0, 2.0), 5)
        assert np.allclose(grid.spacing, [0.25, 0.5])

    def test_validation(self):
        with pytest.raises(ValueError):
            GridSpec(1, (0.0, 0.0), (1.0, 1.0), 4)
        with pytest.raises(ValueError):
            GridSpec(1, (0.0, 0.0), (0.0, 1.0), 9)
        with pytest.raises(ValueError):
            GridSpec(1, (0.0,), (1.0,), 9)


class TestDiscreteHessian:
    def test_sum_of_squares(self):
        grid = make_grid_1(11)
        u = field_of(grid, lambda x, y: x**2 + y**2)
        for idx in ((1, 1), (5, 7), (9, 9)):
            H = discrete_hessian(u, idx)
            assert np.max(np.abs(H - 2.0 * np.eye(2))) < 1e-11

    def test_cross_term(self):
        grid = make_grid_1(9)
        u = field_of(grid, lambda x, y: x * y)
        H = discrete_hessian(u, (4, 4))
        assert np.max(np.abs(H - np.array([[0.0, 1.0], [1.0, 0.0]]))) < 1e-12

    def test_constant(self):
        grid = make_grid_1(7)
        u = ScalarField.constant(grid, 3.5)
        assert np.max(np.abs(discrete_hessian(u, (3, 3)))) == 0.0

    def test_rejects_boundary_point(self):
        grid = make_grid_1(7)
        u = ScalarField.constant(grid, 0.0)
        with pytest.raises(ValueError):
            discrete_hessian(u, (0, 3))

    def test_stack_matches_pointwise(self):
        rng = np.random.default_rng(5)
        grid = make_grid_1(7)
        u = ScalarField(grid, rng.uniform(-1, 1, grid.shape))
        H = hessian_stack(u)
        for i in range(1, 6):
            for j in range(1, 6):
                assert np.allclose(H[i - 1, j - 1], discrete_hessian(u, (i, j)), atol=1e-12)

    def test_quartic_second_order_accuracy(self):
        u_fn, _ = builtin_solution("quartic_radial", 1)
        errs = []
        for P in (9, 17):
            grid = GridSpec(1, (1.0, 1.0), (2.0, 2.0), P)
            u = field_of(grid, u_fn)
            x, y = grid.axis_coords(0)[P // 2], grid.axis_coords(1)[P // 2]
            r2 = x * x + y * y
            exact = r2 * np.eye(2) + 2.0 * np.outer([x, y], [x, y])
            H = discrete_hessian(u, (P // 2, P // 2))
            errs.append(np.max(np.abs(H - exact)))
        assert errs[1] < errs[0] / 3.0


class TestTransfinite:
    def test_exact_for_additive_separable(self):
        grid = make_grid_1(9)
        u = field_of(grid, lambda x, y: x**2 - 3.0 * y**2 + x + y)
        init = transfinite_interpolation(u)
        assert np.max(np.abs(init - u.values)) < 1e-12

    def test_matches_boundary_layer(self):
        rng = np.random.default_rng(9)
        grid = GridSpec(1, (0.0, 0.0), (1.0, 1.0), 7)
        u = ScalarField(grid, rng.uniform(-1, 1, grid.shape))
        init = transfinite_interpolation(u)
        mask = np.zeros(grid.shape, dtype=bool)
        mask[0, :] = mask[-1, :] = mask[:, 0] = mask[:, -1] = True
        assert np.max(np.abs(init[mask] - u.values[mask])) < 1e-12


class TestResidual:
    def test_quadratic_manufactured_zero(self):
        grid = make_grid_1(9)
        u = field_of(grid, lambda x, y: x**2 + y**2)
        g = ScalarField.constant(grid, 2.0)
        res = residual_field(u, g, ThetaBox(0.4, 1))
        assert np.max(np.abs(res.values)) < 1e-11

    def test_zero_field_residual(self):
        grid = make_grid_1(7)
        u = ScalarField.constant(grid, 0.0)
        g = ScalarField.constant(grid, 0.0)
        res = residual_field(u, g, ThetaBox(0.5, 1))
        interior = res.values[1:-1, 1:-1]
        assert np.max(np.abs(interior + 0.5)) < 1e-12
        boundary = res.values.copy()
        boundary[1:-1, 1:-1] = 0.0
        assert np.max(np.abs(boundary)) == 0.0

    def test_shift_in_g(self):
        rng = np.random.default_rng(13)
        grid = make_grid_1(7)
        u = ScalarField(grid, rng.uniform(-1, 1, grid.shape))
        g0 = ScalarField.constant(grid, 0.0)
        g1 = ScalarField.constant(grid, 0.7)
        r0 = residual_field(u, g0, ThetaBox(0.5, 1))
        r1 = residual_field(u, g1, ThetaBox(0.5, 1))
        interior = (slice(1, -1), slice(1, -1))
        assert np.allclose(r1.values[interior], r0.values[interior] - 0.7, atol=1e-12)


class TestSolveQuadratic:
    def test_n1_exact(self):
        grid = GridSpec(1, (-1.0, -1.0), (1.0, 1.0), 17)
        u_fn, g_fn = builtin_solution("quadratic", 1)
        u, policy, report = solve_dirichlet(
            grid, field_of(grid, u_fn), field_of(grid, g_fn), ThetaBox(0.4, 1), workers=1)
        err = np.max(np.abs(u.values - field_of(grid, u_fn).values))
        assert err <= 1e-9
        assert report.converged
        assert policy.eigs_in_box(ThetaBox(0.4, 1))

    def test_n2_exact_small(self):
        grid = GridSpec(2, (-1.0,) * 4, (1.0,) * 4, 7)
        u_fn, g_fn = builtin_solution("quadratic", 2)
        u, policy, report = solve_dirichlet(
            grid, field_of(grid, u_fn), field_of(grid, g_fn), ThetaBox(0.4, 2), workers=1)
        err = np.max(np.abs(u.values - field_of(grid, u_fn).values))
        assert err <= 1e-9
        assert report.converged
        assert policy.eigs_in_box(ThetaBox(0.4, 2))

    def test_anisotropic_domain(self):
        grid = GridSpec(1, (0.0, -2.0), (1.0, 1.0), 9)
        u_fn, g_fn = builtin_solution("quadratic", 1)
        u, _, report = solve_dirichlet(
            grid, field_of(grid, u_fn), field_of(grid, g_fn), ThetaBox(0.4, 1), workers=1)
        assert np.max(np.abs(u.values - field_of(grid, u_fn).values)) <= 1e-9


class TestSolveQuartic:
    def test_recovers_quartic_with_grid_error(self):
        u_fn, g_fn = builtin_solution("quartic_radial", 1)
        box = ThetaBox(1.0 / 16.0, 1)
        grid = GridSpec(1, (1.0, 1.0), (2.0, 2.0), 17)
        u, _, report = solve_dirichlet(
            grid, field_of(grid, u_fn), field_of(grid, g_fn), box, workers=1)
        err = np.max(np.abs(u.values - field_of(grid, u_fn).values))
        assert report.converged
        assert err < 5e-4

    def test_convergence_order(self):
        u_fn, g_fn = builtin_solution("quartic_radial", 1)
        box = ThetaBox(1.0 / 16.0, 1)

        def make_problem(P):
            grid = GridSpec(1, (1.0, 1.0), (2.0, 2.0), P)
            return (grid, field_of(grid, u_fn), field_of(grid, g_fn), box,
                    field_of(grid, u_fn), {})

        rows = convergence_study(make_problem, [9, 17, 33], workers=1)
        assert rows[0].observed_order is None
        assert len(rows) == 3
        for row in rows[1:]:
            assert row.observed_order >= 1.8

    def test_single_refinement_row(self):
        u_fn, g_fn = builtin_solution("quartic_radial", 1)
        box = ThetaBox(1.0 / 16.0, 1)

        def make_problem(P):
            grid = GridSpec(1, (1.0, 1.0), (2.0, 2.0), P)
            return (grid, field_of(grid, u_fn), field_of(grid, g_fn), box,
                    field_of(grid, u_fn), {})

        rows = convergence_study(make_problem, [9], workers=1)
        assert len(rows) == 1 and rows[0].observed_order is None

    def test_quadratic_study_errors_at_rounding_level(self):
        u_fn, g_fn = builtin_solution("quadratic", 1)
        box = ThetaBox(0.4, 1)

        def make_problem(P):
            grid = GridSpec(1, (-1.0, -1.0), (1.0, 1.0), P)
            return (grid, field_of(grid, u_fn), field_of(grid, g_fn), box,
                    field_of(grid, u_fn), {})

        rows = convergence_study(make_problem, [9, 17, 33], workers=1)
        for row in rows:
            assert row.max_error <= 1e-12


class TestPolicyIteration:
    def test_multi_iteration_monotone_residual(self):
        grid = make_grid_1(17)
        boundary = ScalarField.constant(grid, 0.0)
        g = ScalarField.constant(grid, 1.0)
        u, policy, report = solve_dirichlet(grid, boundary, g, ThetaBox(0.5, 1), workers=1)
        assert report.converged
        assert report.iterations >= 2
        hist = report.residual_history
        for i in range(1, len(hist) - 1):
            assert hist[i + 1] <= hist[i] + 1e-12

    def test_consistency_of_both_forms(self):
        # at convergence the frozen affine policy and the envelope agree
        grid = make_grid_1(9)
        boundary = ScalarField.constant(grid, 0.0)
        g = ScalarField.constant(grid, 1.0)
        box = ThetaBox(0.5, 1)
        tol = 1e-10
        u, policy, report = solve_dirichlet(grid, boundary, g, box, tol=tol, workers=1)
        assert report.converged
        res = residual_field(u, g, box)
        assert np.max(np.abs(res.values)) <= tol
        H = hessian_stack(u).reshape(-1, 2, 2)
        lin = np.array([
            mc.trace_inner(policy.slope_matrices[i], H[i]) + policy.intercepts[i]
            for i in range(len(H))
        ])
        assert np.max(np.abs(lin - g.values[1:-1, 1:-1].reshape(-1))) <= 10 * tol

    def test_comparison_principle(self):
        grid = make_grid_1(9)
        boundary = ScalarField.constant(grid, 0.0)
        box = ThetaBox(0.5, 1)
        u1, _, _ = solve_dirichlet(grid, boundary, ScalarField.constant(grid, 1.5),
                                   box, workers=1)
        u2, _, _ = solve_dirichlet(grid, boundary, ScalarField.constant(grid, 1.0),
                                   box, workers=1)
        assert np.all(u1.values <= u2.values + 1e-8)

    def test_max_iter_returns_best_iterate(self):
        grid = make_grid_1(9)
        boundary = ScalarField.constant(grid, 0.0)
        g = ScalarField.constant(grid, 1.0)
        u, policy, report = solve_dirichlet(grid, boundary, g, ThetaBox(0.5, 1),
                                            max_iter=1, workers=1)
        assert not report.converged
        assert report.iterations == 1
        assert np.isfinite(report.final_residual)
        assert policy is not None

    def test_gauss_seidel_matches_direct(self):
        grid = make_grid_1(9)
        boundary = ScalarField.constant(grid, 0.0)
        g = ScalarField.constant(grid, 1.0)
        box = ThetaBox(0.5, 1)
        ud, _, _ = solve_dirichlet(grid, boundary, g, box, workers=1)
        ug, _, rep = solve_dirichlet(grid, boundary, g, box,
                                     linear_solver="gauss_seidel", workers=1)
        assert rep.converged
        assert np.max(np.abs(ud.values - ug.values)) < 1e-9

    def test_input_validation(self):
        grid = make_grid_1(9)
        boundary = ScalarField.constant(grid, 0.0)
        g = ScalarField.constant(grid, 1.0)
        with pytest.raises(ValueError):
            solve_dirichlet(grid, boundary, g, ThetaBox(0.5, 1), tol=0.0)
        with pytest.raises(ValueError):
            solve_dirichlet(grid, boundary, g, ThetaBox(0.5, 1), linear_solver="funky")
        bad = ScalarField.constant(grid, np.nan)
        with pytest.raises(ValueError):
            solve_dirichlet(grid, bad, g, ThetaBox(0.5, 1))


class TestCheckPremises:
    def test_quadratic_membership(self):
        for n in (1, 2):
            grid = GridSpec(n, (-1.0,) * (2 * n), (1.0,) * (2 * n), 7)
            u_fn, _ = builtin_solution("quadratic", n)
            u = field_of(grid, u_fn)
            rep = check_premises(u, 2.0, 2.0)
            assert rep.theta == 0.5
            assert rep.fraction_in_box == 1.0
            assert abs(rep.min_eig - 2.0) < 1e-10
            assert abs(rep.max_eig - 2.0) < 1e-10

    def test_zero_field_outside(self):
        grid = make_grid_1(7)
        u = ScalarField.constant(grid, 0.0)
        rep = check_premises(u, 0.5, 2.0)
        assert rep.fraction_in_box == 0.0

    def test_inconsistent_bounds(self):
        grid = make_grid_1(7)
        u = ScalarField.constant(grid, 0.0)
        with pytest.raises(ValueError):
            check_premises(u, 3.0, 1.0)
