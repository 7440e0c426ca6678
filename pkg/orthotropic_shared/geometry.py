"""Uniform square grids, concentric balls and smooth radial cutoffs.

Every ball is centred at the grid centre; off-centre balls are not
representable. Node arrays are laid out ``[row, column]`` with rows running
along ``x2`` (south to north) and columns along ``x1`` (west to east).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from orthotropic_shared.errors import GeometryError

logger = logging.getLogger(__name__)

MIN_NODES = 9
# Peak slope of the quintic smoothstep 6s^5 - 15s^4 + 10s^3, reached at s = 1/2.
SMOOTHSTEP_SLOPE = 1.875
RING_HALF_WIDTH = math.sqrt(2.0)


@dataclass(frozen=True)
class Grid:
    """Uniform ``n x n`` lattice covering a square of side ``side``."""

    n: int
    side: float
    center: tuple[float, float] = (0.0, 0.0)
    h: float = field(init=False)

    def __post_init__(self) -> None:
        if int(self.n) != self.n:
            raise GeometryError(f"n must be an integer, got {self.n!r}")
        if self.n % 2 == 0:
            raise GeometryError(f"n must be odd so a node sits at the center, got n={self.n}")
        if self.n < MIN_NODES:
            raise GeometryError(f"n must be at least {MIN_NODES}, got n={self.n}")
        if not math.isfinite(self.side) or self.side <= 0.0:
            raise GeometryError(f"side must be positive and finite, got {self.side!r}")
        if len(self.center) != 2 or not all(math.isfinite(c) for c in self.center):
            raise GeometryError(f"center must be a finite point, got {self.center!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "side", float(self.side))
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "h", self.side / (self.n - 1))

    @property
    def half_side(self) -> float:
        return 0.5 * self.side

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @property
    def cell_shape(self) -> tuple[int, int]:
        return (self.n - 1, self.n - 1)

    def offsets(self) -> np.ndarray:
        """Node positions relative to the center along one axis."""
        return self.h * (np.arange(self.n, dtype=np.float64) - 0.5 * (self.n - 1))

    def cell_offsets(self) -> np.ndarray:
        return self.h * (np.arange(self.n - 1, dtype=np.float64) - 0.5 * (self.n - 2))

    def local_coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates relative to the center, as ``(x1, x2)`` arrays."""
        offsets = self.offsets()
        return np.meshgrid(offsets, offsets, indexing="xy")

    def node_coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        x1, x2 = self.local_coordinates()
        return x1 + self.center[0], x2 + self.center[1]

    def local_cell_coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        offsets = self.cell_offsets()
        return np.meshgrid(offsets, offsets, indexing="xy")

    def node_distance(self) -> np.ndarray:
        x1, x2 = self.local_coordinates()
        return np.hypot(x1, x2)

    def cell_distance(self) -> np.ndarray:
        x1, x2 = self.local_cell_coordinates()
        return np.hypot(x1, x2)

    def node(self, i: int, j: int) -> tuple[float, float]:
        """Coordinates of node ``(i, j)`` with ``i`` along x1 and ``j`` along x2."""
        mid = 0.5 * (self.n - 1)
        return (
            self.center[0] + self.h * (i - mid),
            self.center[1] + self.h * (j - mid),
        )

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[0, :] = mask[-1, :] = True
        mask[:, 0] = mask[:, -1] = True
        return mask

    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask()

    def describe(self) -> dict[str, float | int | list[float]]:
        return {"n": self.n, "side": self.side, "h": self.h, "center": list(self.center)}


@dataclass(frozen=True)
class BallSpec:
    """Open ball of the given radius about the grid center."""

    radius: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.radius) or self.radius <= 0.0:
            raise GeometryError(f"ball radius must be positive, got {self.radius!r}")
        object.__setattr__(self, "radius", float(self.radius))

    def check_on(self, grid: Grid) -> None:
        if self.radius + 2.0 * grid.h >= grid.half_side:
            raise GeometryError(
                f"ball of radius {self.radius:g} is not compactly inside the grid: "
                f"radius + 2h must stay below side/2 = {grid.half_side:g}"
            )

    def scaled(self, factor: float) -> "BallSpec":
        return BallSpec(self.radius * factor)


@dataclass(frozen=True, eq=False)
class Cutoff:
    """Radial quintic-smoothstep cutoff equal to 1 on B_inner and 0 outside B_outer.

    Node samples follow the field layout; ``cell_*`` arrays hold the same
    quantities evaluated at cell centers for quadrature.
    """

    inner: float
    outer: float
    values: np.ndarray = field(repr=False)
    grad_norm: np.ndarray = field(repr=False)
    hess_norm: np.ndarray = field(repr=False)
    cell_values: np.ndarray = field(repr=False)
    cell_grad_norm: np.ndarray = field(repr=False)
    cell_hess_norm: np.ndarray = field(repr=False)

    @property
    def slope_bound(self) -> float:
        return SMOOTHSTEP_SLOPE / (self.outer - self.inner)


def build_grid(n: int, side: float, center: tuple[float, float] = (0.0, 0.0)) -> Grid:
    grid = Grid(n=n, side=side, center=tuple(center))
    logger.debug("built grid n=%d side=%g h=%g", grid.n, grid.side, grid.h)
    return grid


def ball_mask(grid: Grid, ball: BallSpec) -> np.ndarray:
    ball.check_on(grid)
    return grid.node_distance() < ball.radius


def ball_nodes(grid: Grid, ball: BallSpec) -> np.ndarray:
    """Flat (row-major) indices of the nodes strictly inside the ball."""
    return np.flatnonzero(ball_mask(grid, ball))


def cell_ball_mask(grid: Grid, ball: BallSpec) -> np.ndarray:
    ball.check_on(grid)
    return grid.cell_distance() < ball.radius


def ring_mask(grid: Grid, ball: BallSpec) -> np.ndarray:
    ball.check_on(grid)
    if ball.radius < 2.0 * grid.h:
        raise GeometryError(
            f"boundary ring is empty: radius {ball.radius:g} must be at least 2h = {2.0 * grid.h:g}"
        )
    band = RING_HALF_WIDTH * grid.h
    mask = np.abs(grid.node_distance() - ball.radius) <= band
    if not mask.any():
        raise GeometryError(f"boundary ring of radius {ball.radius:g} contains no nodes")
    return mask


def boundary_ring(grid: Grid, ball: BallSpec) -> np.ndarray:
    """Flat indices of the discrete circle: nodes within h*sqrt(2) of the sphere."""
    return np.flatnonzero(ring_mask(grid, ball))


def ring_interior_mask(grid: Grid, ball: BallSpec) -> np.ndarray:
    """Nodes enclosed by the ring (strictly inside its inner edge)."""
    ring_mask(grid, ball)
    return grid.node_distance() < ball.radius - RING_HALF_WIDTH * grid.h


def _smoothstep(s: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    value = s**3 * (10.0 + s * (-15.0 + 6.0 * s))
    slope = 30.0 * s**2 * (1.0 - s) ** 2
    curvature = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s)
    return value, slope, curvature


def _radial_profile(
    x1: np.ndarray, x2: np.ndarray, inner: float, outer: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    width = outer - inner
    rho = np.hypot(x1, x2)
    s = np.clip((outer - rho) / width, 0.0, 1.0)
    value, slope, curvature = _smoothstep(s)
    # xi(x) = S((outer - |x|) / width), so f' = -S'/width and f'' = S''/width^2.
    d1 = -slope / width
    d2 = curvature / width**2
    safe_rho = np.where(rho > 0.0, rho, 1.0)
    e1 = np.where(rho > 0.0, x1 / safe_rho, 0.0)
    e2 = np.where(rho > 0.0, x2 / safe_rho, 0.0)
    tangential = np.where(rho > 0.0, d1 / safe_rho, 0.0)
    h11 = d2 * e1**2 + tangential * (1.0 - e1**2)
    h22 = d2 * e2**2 + tangential * (1.0 - e2**2)
    h12 = (d2 - tangential) * e1 * e2
    hess = np.maximum(np.abs(h11), np.maximum(np.abs(h22), np.abs(h12)))
    return value, np.abs(d1), hess


def make_cutoff(grid: Grid, inner: float, outer: float) -> Cutoff:
    if inner >= outer:
        raise GeometryError(f"cutoff needs inner < outer, got inner={inner:g} outer={outer:g}")
    if inner <= 2.0 * grid.h:
        raise GeometryError(f"cutoff inner radius {inner:g} must exceed 2h = {2.0 * grid.h:g}")
    if outer > grid.half_side:
        raise GeometryError(f"cutoff outer radius {outer:g} exceeds side/2 = {grid.half_side:g}")
    node_x1, node_x2 = grid.local_coordinates()
    cell_x1, cell_x2 = grid.local_cell_coordinates()
    values, grad_norm, hess_norm = _radial_profile(node_x1, node_x2, inner, outer)
    cell_values, cell_grad, cell_hess = _radial_profile(cell_x1, cell_x2, inner, outer)
    arrays = (values, grad_norm, hess_norm, cell_values, cell_grad, cell_hess)
    for array in arrays:
        array.setflags(write=False)
    return Cutoff(float(inner), float(outer), *arrays)
