"""Node fields, cell gradients, ball quadrature and oscillations."""

import math

import numpy as np
import pytest

from orthotropic_shared.errors import FieldError, ParameterError
from orthotropic_shared.fields import (
    CellField,
    ScalarField,
    cell_gradient,
    integrate_annulus,
    integrate_ball,
    lp_gradient_norm,
    node_derivative,
    oscillation,
)
from orthotropic_shared.geometry import BallSpec, Grid, build_grid


def affine(x1, x2):
    return 3.0 * x1 - 2.0 * x2 + 1.0


class TestScalarField:
    def test_shape_checked(self, grid17):
        with pytest.raises(FieldError, match="17x17"):
            ScalarField(grid17, np.zeros((16, 17)))

    def test_nonfinite_rejected(self, grid17):
        values = np.zeros(grid17.shape)
        values[3, 4] = np.nan
        with pytest.raises(FieldError, match="finite"):
            ScalarField(grid17, values)

    def test_values_read_only_and_copied(self, grid17):
        source = np.ones(grid17.shape)
        field = ScalarField(grid17, source)
        source[0, 0] = 5.0
        assert field.values[0, 0] == 1.0
        with pytest.raises(ValueError):
            field.values[0, 0] = 2.0

    def test_local_sampling_ignores_center(self):
        shifted = Grid(17, 2.0, (0.5, 0.25))
        local = ScalarField.from_function(shifted, lambda x1, x2: x1, local=True)
        absolute = ScalarField.from_function(shifted, lambda x1, x2: x1)
        assert np.allclose(absolute.values - local.values, 0.5)

    def test_transpose_swaps_axes(self, grid17):
        u = ScalarField.from_function(grid17, lambda x1, x2: x1)
        v = ScalarField.from_function(grid17, lambda x1, x2: x2)
        assert np.array_equal(u.transpose().values, v.values)

    def test_different_grids(self, grid17, grid33):
        with pytest.raises(FieldError):
            ScalarField.zeros(grid17).require_same_grid(ScalarField.zeros(grid33))


class TestGradients:
    def test_affine_cell_gradient_is_exact(self, grid33):
        g = cell_gradient(ScalarField.from_function(grid33, affine))
        assert np.allclose(g.g1, 3.0, atol=1e-12)
        assert np.allclose(g.g2, -2.0, atol=1e-12)
        assert np.allclose(g.magnitude_sq(), 13.0, atol=1e-11)

    def test_quadratic_cell_gradient_at_centers(self, grid33):
        g = cell_gradient(ScalarField.from_function(grid33, lambda x1, x2: 0.5 * x1**2 + x1 * x2))
        c1, c2 = grid33.local_cell_coordinates()
        assert np.allclose(g.g1, c1 + c2, atol=1e-12)
        assert np.allclose(g.g2, c1, atol=1e-12)

    def test_node_derivative_of_quadratic_is_exact(self, grid33):
        u = ScalarField.from_function(grid33, lambda x1, x2: x1**2 - 3.0 * x2**2)
        x1, x2 = grid33.node_coordinates()
        assert np.allclose(node_derivative(u, 1).values, 2.0 * x1, atol=1e-10)
        assert np.allclose(node_derivative(u, 2).values, -6.0 * x2, atol=1e-10)

    def test_node_derivative_axis(self, grid17):
        with pytest.raises(FieldError, match="axis"):
            node_derivative(ScalarField.zeros(grid17), 3)

    def test_node_derivative_is_second_order(self):
        errors = []
        for n in (33, 65):
            grid = build_grid(n, 2.0)
            u = ScalarField.from_function(grid, lambda x1, x2: np.sin(2.0 * x1) * np.cos(x2))
            x1, x2 = grid.local_coordinates()
            errors.append(float(np.max(np.abs(node_derivative(u, 1).values - 2.0 * np.cos(2.0 * x1) * np.cos(x2)))))
        assert 0.2 <= errors[1] / errors[0] <= 0.3


class TestIntegration:
    def test_ball_area(self, grid129):
        ones = CellField(grid129, np.ones(grid129.cell_shape))
        assert integrate_ball(ones, BallSpec(0.5)) == pytest.approx(math.pi * 0.25, rel=0.02)
        assert integrate_ball(ones, BallSpec(0.5), average=True) == pytest.approx(1.0, rel=0.02)

    def test_annulus(self, grid129):
        ones = CellField(grid129, np.ones(grid129.cell_shape))
        annulus = integrate_annulus(ones, BallSpec(0.2), BallSpec(0.4))
        assert annulus == pytest.approx(math.pi * 0.12, rel=0.05)

    def test_gradient_source_needs_integrand(self, grid33):
        g = cell_gradient(ScalarField.zeros(grid33))
        with pytest.raises(FieldError, match="integrand"):
            integrate_ball(g, BallSpec(0.5))

    def test_empty_ball(self, grid17):
        ones = CellField(grid17, np.ones(grid17.cell_shape))
        with pytest.raises(FieldError, match="no cell centers"):
            integrate_ball(ones, BallSpec(0.05))

    def test_lp_norm_of_affine(self, grid129):
        u = ScalarField.from_function(grid129, affine)
        expected = 13.0**0.75 * math.pi * 0.5**2
        assert lp_gradient_norm(u, BallSpec(0.5), 1.5) == pytest.approx(expected, rel=0.02)

    def test_lp_norm_of_affine_scales_with_area(self, grid129):
        u = ScalarField.from_function(grid129, affine)
        radii = np.array([0.2, 0.4, 0.8])
        norms = [lp_gradient_norm(u, BallSpec(r), 1.5) for r in radii]
        slope = np.polyfit(np.log(radii), np.log(norms), 1)[0]
        assert slope == pytest.approx(2.0, abs=0.05)

    def test_lp_norm_exponent(self, grid33):
        with pytest.raises(ParameterError):
            lp_gradient_norm(ScalarField.zeros(grid33), BallSpec(0.5), 2.0)


class TestOscillation:
    def test_linear_field(self, grid65):
        u = ScalarField.from_function(grid65, lambda x1, x2: x1)
        # Nodes strictly inside B_0.3 reach x1 = 9/32 on the axis.
        assert oscillation(u, BallSpec(0.3)) == pytest.approx(2.0 * 9.0 / 32.0, rel=1e-14)

    def test_constant_field(self, grid33):
        u = ScalarField.from_function(grid33, lambda x1, x2: np.full_like(x1, 4.0))
        assert oscillation(u, BallSpec(0.5)) == 0.0
