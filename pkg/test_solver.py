"""Newton-CG solves, eps ladders, continuation and minimality."""

import numpy as np
import pytest

from orthotropic_shared.energy import EnergyParams, energy
from orthotropic_shared.errors import FieldError, LadderError, ParameterError
from orthotropic_shared.fields import ScalarField
from orthotropic_shared.geometry import BallSpec, Grid, build_grid
from orthotropic_shared.scenarios import make_scenario
from orthotropic_shared.solver import (
    SolveConfig,
    coons_interpolation,
    continuation_solve,
    epsilon_ladder,
    ladder_eps_values,
    minimality_check,
    random_competitors,
    solve_dirichlet,
    summarize_ladder,
)


def oscillatory_boundary(grid):
    return make_scenario("oscillatory", 1.5).boundary(grid)


class TestSolveConfig:
    def test_invalid_caps(self):
        with pytest.raises(ParameterError):
            SolveConfig(max_newton=0)

    def test_invalid_armijo(self):
        with pytest.raises(ParameterError):
            SolveConfig(armijo_slope=0.8)


class TestCoons:
    def test_reproduces_bilinear_data(self, grid33):
        bilinear = ScalarField.from_function(grid33, lambda x1, x2: 2.0 * x1 * x2 - x1 + 0.5)
        assert np.allclose(coons_interpolation(bilinear).values, bilinear.values, atol=1e-12)

    def test_keeps_boundary(self, grid33):
        boundary = oscillatory_boundary(grid33)
        mask = grid33.boundary_mask()
        assert np.allclose(coons_interpolation(boundary).values[mask], boundary.values[mask], atol=1e-14)


class TestSolveDirichlet:
    def test_affine_data_is_exact(self, grid65):
        scenario = make_scenario("affine", 1.5)
        u, report = solve_dirichlet(grid65, scenario.boundary(grid65), EnergyParams(1.5, 1e-3))
        assert report.converged
        assert np.max(np.abs(u.values - scenario.exact_solution(grid65).values)) < 1e-9

    def test_eps_zero_rejected(self, grid17):
        with pytest.raises(ParameterError, match="eps > 0"):
            solve_dirichlet(grid17, oscillatory_boundary(grid17), EnergyParams(1.5, 0.0))

    def test_boundary_on_other_grid(self, grid17, grid33):
        with pytest.raises(FieldError):
            solve_dirichlet(grid17, oscillatory_boundary(grid33), EnergyParams(1.5, 0.1))

    def test_boundary_values_kept(self, grid17):
        boundary = oscillatory_boundary(grid17)
        u, report = solve_dirichlet(grid17, boundary, EnergyParams(1.5, 1e-2))
        mask = grid17.boundary_mask()
        assert report.converged
        assert np.array_equal(u.values[mask], boundary.values[mask])
        assert report.residual_sup <= 1e-10

    def test_energy_history_decreases(self, grid33):
        _, report = solve_dirichlet(grid33, oscillatory_boundary(grid33), EnergyParams(1.3, 1e-3))
        history = report.energy_history
        assert report.converged
        assert all(b < a for a, b in zip(history, history[1:]))
        assert history[-1] == report.energy

    def test_oscillatory_converges_with_default_config(self, grid65):
        u, report = solve_dirichlet(grid65, oscillatory_boundary(grid65), EnergyParams(1.5, 1e-2))
        assert report.converged, report.message
        assert report.residual_sup <= SolveConfig().tol_residual
        assert report.iterations < SolveConfig().max_newton
        assert np.all(np.isfinite(u.values))

    def test_zero_boundary_gives_zero_solution(self, grid33):
        u, report = solve_dirichlet(grid33, ScalarField.zeros(grid33), EnergyParams(1.5, 1e-3))
        assert report.converged
        assert report.iterations == 0
        assert np.array_equal(u.values, np.zeros(grid33.shape))

    @pytest.mark.parametrize("p", [1.2, 1.5, 1.8])
    def test_solution_stays_within_boundary_range(self, grid33, p):
        boundary = make_scenario("ustar", p).boundary(grid33)
        u, report = solve_dirichlet(grid33, boundary, EnergyParams(p, 1e-3))
        data = boundary.boundary_values()
        assert report.converged
        assert u.values.min() >= data.min() - 1e-9
        assert u.values.max() <= data.max() + 1e-9

    def test_iteration_cap_reported(self, grid33):
        _, report = solve_dirichlet(
            grid33, oscillatory_boundary(grid33), EnergyParams(1.5, 1e-3), SolveConfig(max_newton=1)
        )
        assert not report.converged
        assert "no convergence" in report.message
        assert report.iterations == 1

    def test_transpose_symmetry(self, grid17):
        boundary = oscillatory_boundary(grid17)
        params = EnergyParams(1.5, 1e-2)
        cfg = SolveConfig(tol_residual=1e-12)
        u, _ = solve_dirichlet(grid17, boundary, params, cfg)
        v, _ = solve_dirichlet(grid17, boundary.transpose(), params, cfg)
        assert np.allclose(v.values, u.values.T, rtol=0.0, atol=1e-8)

    def test_translation_invariance(self):
        centered = build_grid(17, 2.0)
        shifted = Grid(17, 2.0, (0.7, -0.4))
        params = EnergyParams(1.5, 1e-2)
        u, _ = solve_dirichlet(centered, oscillatory_boundary(centered), params)
        v, _ = solve_dirichlet(shifted, oscillatory_boundary(shifted), params)
        assert np.array_equal(u.values, v.values)


class TestLadder:
    def test_eps_values(self):
        assert ladder_eps_values(1e-2, 3) == pytest.approx((1e-2, 2.5e-3, 6.25e-4), rel=1e-15)

    def test_too_few_levels(self, grid17):
        with pytest.raises(LadderError, match="at least 2"):
            epsilon_ladder(grid17, oscillatory_boundary(grid17), 1.5, 1e-2, 1)

    def test_nonpositive_eps0(self, grid17):
        with pytest.raises(LadderError, match="eps0"):
            epsilon_ladder(grid17, oscillatory_boundary(grid17), 1.5, 0.0, 3)

    def test_ustar_matches_exact_solution(self, grid33):
        scenario = make_scenario("ustar", 1.5)
        exact = scenario.exact_solution(grid33)
        u, ladder = epsilon_ladder(
            grid33, scenario.boundary(grid33), 1.5, 1e-2, 6, ball=BallSpec(0.8), exact=exact
        )
        assert len(ladder.reports) == 6
        assert all(report.converged for report in ladder.reports)
        assert np.max(np.abs(u.values - exact.values)) <= 0.05 * exact.sup_norm()
        assert len(ladder.exact_errors) == 6
        assert len(ladder.sup_differences) == 5

    def test_summary_serializes(self, grid17):
        u, ladder = epsilon_ladder(
            grid17, oscillatory_boundary(grid17), 1.5, 1e-1, 3, ball=BallSpec(0.5)
        )
        data = ladder.to_dict()
        assert data["eps_values"] == pytest.approx([1e-1, 2.5e-2, 6.25e-3])
        assert len(data["reports"]) == 3
        assert "heuristic" in data["cauchy_criterion"]
        assert ladder.fields[-1] is u

    def test_summarize_needs_matching_lengths(self, grid17):
        u = ScalarField.zeros(grid17)
        with pytest.raises(LadderError):
            summarize_ladder([u, u], [1e-2], 1.5, BallSpec(0.5))
        with pytest.raises(LadderError):
            summarize_ladder([u], [1e-2], 1.5, BallSpec(0.5))


class TestContinuation:
    def test_matches_ladder_bitwise(self, grid17):
        boundary = oscillatory_boundary(grid17)
        eps_values = ladder_eps_values(1e-2, 3)
        from_ladder, _ = epsilon_ladder(grid17, boundary, 1.5, 1e-2, 3, ball=BallSpec(0.5))
        from_continuation, report = continuation_solve(grid17, boundary, 1.5, eps_values[-1], 1e-2)
        assert report.converged
        assert np.array_equal(from_ladder.values, from_continuation.values)

    def test_off_ladder_target(self, grid17):
        u, report = continuation_solve(grid17, oscillatory_boundary(grid17), 1.5, 3e-3, 1e-2)
        assert report.converged
        assert np.all(np.isfinite(u.values))

    def test_nonpositive_eps(self, grid17):
        with pytest.raises(LadderError):
            continuation_solve(grid17, oscillatory_boundary(grid17), 1.5, 0.0, 1e-2)


class TestMinimality:
    def test_solution_beats_competitors(self, grid17):
        params = EnergyParams(1.5, 1e-2)
        u, _ = solve_dirichlet(grid17, oscillatory_boundary(grid17), params)
        report = minimality_check(u, random_competitors(u, 40, seed=3), params)
        assert report.passed
        assert report.lhs == pytest.approx(energy(u, params))
        assert report.context["worst_margin"] >= 0.0

    def test_competitor_can_fail(self, grid17):
        params = EnergyParams(1.5, 1e-2)
        u, _ = solve_dirichlet(grid17, oscillatory_boundary(grid17), params)
        worse = random_competitors(u, 1, amplitudes=(0.1,), seed=0)[0]
        assert not minimality_check(worse, [u], params).passed

    def test_competitors_are_seeded_and_share_boundary(self, grid17):
        u = oscillatory_boundary(grid17)
        first = random_competitors(u, 5, seed=7)
        second = random_competitors(u, 5, seed=7)
        mask = grid17.boundary_mask()
        for a, b in zip(first, second):
            assert np.array_equal(a.values, b.values)
            assert np.array_equal(a.values[mask], u.values[mask])

    def test_boundary_mismatch(self, grid17):
        u = oscillatory_boundary(grid17)
        other = ScalarField(grid17, u.values + 1.0)
        with pytest.raises(FieldError, match="boundary"):
            minimality_check(u, [other], EnergyParams(1.5, 0.1))

    def test_needs_competitors(self, grid17):
        with pytest.raises(FieldError):
            minimality_check(ScalarField.zeros(grid17), [], EnergyParams(1.5, 0.1))


@pytest.mark.slow
class TestDeskScale:
    @pytest.mark.parametrize("p", [1.2, 1.5, 1.8])
    def test_ustar_error_shrinks_under_refinement(self, p):
        scenario = make_scenario("ustar", p)
        errors = []
        for n in (65, 129):
            grid = build_grid(n, 2.0)
            u, report = continuation_solve(grid, scenario.boundary(grid), p, 1e-6, 1e-2)
            assert report.converged
            exact = scenario.exact_solution(grid)
            errors.append(float(np.max(np.abs(u.values - exact.values))))
            assert errors[-1] <= 0.02 * exact.sup_norm()
        assert errors[0] >= 1.5 * errors[1]

    def test_oscillatory_converges_at_desk_resolution(self):
        grid = build_grid(129, 2.0)
        _, report = solve_dirichlet(grid, oscillatory_boundary(grid), EnergyParams(1.5, 1e-2))
        assert report.converged, report.message
