"""Grids, balls, discrete rings and radial cutoffs."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orthotropic_shared.errors import GeometryError
from orthotropic_shared.geometry import (
    SMOOTHSTEP_SLOPE,
    BallSpec,
    Grid,
    ball_mask,
    ball_nodes,
    boundary_ring,
    build_grid,
    make_cutoff,
    ring_interior_mask,
    ring_mask,
)


class TestGrid:
    def test_spacing(self, grid65):
        assert grid65.h == pytest.approx(2.0 / 64, rel=1e-15)
        assert grid65.shape == (65, 65)
        assert grid65.cell_shape == (64, 64)

    @pytest.mark.parametrize("n", [64, 8, 2])
    def test_even_n_rejected(self, n):
        with pytest.raises(GeometryError, match="odd"):
            build_grid(n, 2.0)

    def test_too_few_nodes(self):
        with pytest.raises(GeometryError, match="at least"):
            build_grid(7, 2.0)

    def test_bad_side(self):
        with pytest.raises(GeometryError):
            build_grid(33, 0.0)

    def test_center_node(self, grid65):
        assert grid65.node(32, 32) == (0.0, 0.0)
        shifted = Grid(65, 2.0, (0.3, -0.2))
        assert shifted.node(32, 32) == pytest.approx((0.3, -0.2))
        assert shifted.node(64, 0) == pytest.approx((1.3, -1.2))

    def test_layout_rows_follow_x2(self, grid17):
        x1, x2 = grid17.node_coordinates()
        assert np.all(np.diff(x1, axis=1) > 0.0)
        assert np.all(np.diff(x2, axis=0) > 0.0)
        assert x2[0, 0] == pytest.approx(-1.0)

    def test_boundary_mask(self, grid17):
        mask = grid17.boundary_mask()
        assert mask.sum() == 4 * 16
        assert not mask[1:-1, 1:-1].any()


class TestBall:
    def test_compact_containment(self, grid65):
        BallSpec(0.9).check_on(grid65)
        with pytest.raises(GeometryError, match="compactly"):
            BallSpec(0.97).check_on(grid65)

    def test_nonpositive_radius(self):
        with pytest.raises(GeometryError):
            BallSpec(0.0)

    def test_ball_is_open(self, grid65):
        mask = ball_mask(grid65, BallSpec(0.25))
        # (0.25, 0) is a node: distance equal to the radius is outside.
        assert not mask[32, 40]
        assert mask[32, 39]

    def test_ball_nodes_are_flat_indices(self, grid65):
        nodes = ball_nodes(grid65, BallSpec(0.25))
        assert nodes.size == ball_mask(grid65, BallSpec(0.25)).sum()
        assert 32 * 65 + 32 in nodes
        assert 32 * 65 + 40 not in nodes

    def test_radius_just_above_one_cell_holds_five_nodes(self, grid65):
        nodes = ball_nodes(grid65, BallSpec(1.1 * grid65.h))
        assert sorted(nodes) == sorted(32 * 65 + 32 + k for k in (-65, -1, 0, 1, 65))


class TestRing:
    def test_radius_below_two_cells(self, grid65):
        with pytest.raises(GeometryError, match="2h"):
            ring_mask(grid65, BallSpec(0.05))

    @pytest.mark.parametrize("radius", [0.1, 0.25, 0.5, 0.8])
    def test_ring_and_interior_cover_ball(self, grid65, radius):
        ball = BallSpec(radius)
        ring = ring_mask(grid65, ball)
        interior = ring_interior_mask(grid65, ball)
        inside = grid65.node_distance() < radius
        assert np.all(ring | interior | ~inside)
        assert not np.any(ring & interior)

    def test_ring_encloses_interior(self, grid65):
        ball = BallSpec(0.4)
        ring = ring_mask(grid65, ball)
        interior = ring_interior_mask(grid65, ball)
        # Every interior node's 4-neighbours are interior or on the ring.
        rows, cols = np.nonzero(interior)
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            neighbours = (rows + di, cols + dj)
            assert np.all(ring[neighbours] | interior[neighbours])

    def test_flat_indices(self, grid33):
        indices = boundary_ring(grid33, BallSpec(0.5))
        assert indices.size == ring_mask(grid33, BallSpec(0.5)).sum()

    def test_ring_converges_to_circle(self):
        radius = 0.5
        distances, sizes = [], []
        for n in (65, 129):
            grid = build_grid(n, 2.0)
            ring = ring_mask(grid, BallSpec(radius))
            x1, x2 = grid.local_coordinates()
            to_circle = float(np.max(np.abs(np.hypot(x1[ring], x2[ring]) - radius)))
            angles = np.linspace(0.0, 2.0 * math.pi, 720, endpoint=False)
            circle = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
            nodes = np.stack([x1[ring], x2[ring]], axis=1)
            to_ring = float(np.max(np.min(np.linalg.norm(circle[:, None, :] - nodes[None, :, :], axis=2), axis=1)))
            distance = max(to_circle, to_ring)
            assert distance <= math.sqrt(2.0) * grid.h * (1.0 + 1e-12)
            distances.append(distance)
            sizes.append(ring.sum() * grid.h**2)
        assert 0.35 <= distances[1] / distances[0] <= 0.65
        assert sizes[1] < 0.6 * sizes[0]


class TestCutoff:
    def test_values(self, grid65):
        cutoff = make_cutoff(grid65, 0.4, 0.8)
        d = grid65.node_distance()
        assert np.all(cutoff.values[d <= 0.4] == 1.0)
        assert np.all(cutoff.values[d >= 0.8] == 0.0)
        assert cutoff.values.min() >= 0.0
        assert cutoff.values.max() <= 1.0

    def test_slope_bound(self, grid65):
        cutoff = make_cutoff(grid65, 0.4, 0.8)
        assert cutoff.slope_bound == pytest.approx(SMOOTHSTEP_SLOPE / 0.4)
        assert cutoff.grad_norm.max() <= cutoff.slope_bound * (1.0 + 1e-12)
        assert cutoff.cell_grad_norm.max() <= cutoff.slope_bound * (1.0 + 1e-12)

    def test_peak_slope_and_midpoint(self, grid129):
        cutoff = make_cutoff(grid129, 0.25, 0.75)
        assert cutoff.grad_norm.max() == pytest.approx(SMOOTHSTEP_SLOPE / 0.5, rel=0.02)
        # Node (row 64, column 96) sits on the x1 axis at the mid radius 0.5.
        assert cutoff.values[64, 96] == pytest.approx(0.5, rel=1e-12)

    def test_read_only(self, grid33):
        cutoff = make_cutoff(grid33, 0.4, 0.8)
        with pytest.raises(ValueError):
            cutoff.values[0, 0] = 2.0

    def test_gradient_matches_finite_differences(self, grid129):
        cutoff = make_cutoff(grid129, 0.3, 0.8)
        row = cutoff.values[64, 64:]
        slope = np.abs(np.gradient(row, grid129.h))
        assert np.allclose(slope[1:-1], cutoff.grad_norm[64, 65:-1], atol=2e-2 * cutoff.slope_bound)

    @pytest.mark.parametrize(
        "inner, outer, message",
        [(0.5, 0.5, "inner < outer"), (0.1, 0.8, "2h"), (0.4, 1.2, "side/2")],
    )
    def test_invalid(self, grid33, inner, outer, message):
        with pytest.raises(GeometryError, match=message):
            make_cutoff(grid33, inner, outer)

    @given(
        inner=st.floats(min_value=0.15, max_value=0.6),
        width=st.floats(min_value=0.05, max_value=0.35),
    )
    @settings(max_examples=40, deadline=None)
    def test_bounds_hold_for_any_radii(self, inner, width):
        grid = build_grid(33, 2.0)
        cutoff = make_cutoff(grid, inner, inner + width)
        assert np.all((0.0 <= cutoff.values) & (cutoff.values <= 1.0))
        assert np.all(cutoff.grad_norm <= cutoff.slope_bound * (1.0 + 1e-12))
        assert np.all(cutoff.hess_norm >= 0.0)
        assert math.isfinite(float(cutoff.hess_norm.max()))
