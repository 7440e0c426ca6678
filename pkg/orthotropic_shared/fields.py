"""Node-valued scalar fields, cell gradients, ball integrals and oscillations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from orthotropic_shared.errors import FieldError, ParameterError
from orthotropic_shared.geometry import BallSpec, Grid, ball_mask, cell_ball_mask


def _frozen(values: np.ndarray) -> np.ndarray:
    values.setflags(write=False)
    return values


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One real value per grid node, stored as an ``(n, n)`` array."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.shape != self.grid.shape:
            raise FieldError(
                f"field needs {self.grid.n}x{self.grid.n} values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise FieldError("field values must all be finite")
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def from_function(
        cls,
        grid: Grid,
        fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
        *,
        local: bool = False,
    ) -> "ScalarField":
        """Sample ``fn(x1, x2)`` at the nodes (relative to the center if ``local``)."""
        x1, x2 = grid.local_coordinates() if local else grid.node_coordinates()
        return cls(grid, np.broadcast_to(fn(x1, x2), grid.shape))

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, values)

    def scaled(self, factor: float) -> "ScalarField":
        return ScalarField(self.grid, factor * self.values)

    def transpose(self) -> "ScalarField":
        """Exchange the roles of x1 and x2 about the grid center."""
        return ScalarField(self.grid, self.values.T)

    def boundary_values(self) -> np.ndarray:
        return self.values[self.grid.boundary_mask()]

    def sup_norm(self, mask: np.ndarray | None = None) -> float:
        values = self.values if mask is None else self.values[mask]
        return float(np.max(np.abs(values))) if values.size else 0.0

    def require_same_grid(self, other: "ScalarField") -> None:
        if other.grid != self.grid:
            raise FieldError("fields live on different grids")


@dataclass(frozen=True, eq=False)
class CellField:
    """One real value per grid cell, shape ``(n-1, n-1)``."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.grid.cell_shape:
            raise FieldError(f"cell field needs shape {self.grid.cell_shape}, got {values.shape}")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True, eq=False)
class GradientField:
    """Bilinear-element average gradient, constant on each cell."""

    grid: Grid
    g1: np.ndarray = field(repr=False)
    g2: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        for name in ("g1", "g2"):
            component = getattr(self, name)
            if component.shape != self.grid.cell_shape:
                raise FieldError(f"{name} needs shape {self.grid.cell_shape}, got {component.shape}")
            if not np.all(np.isfinite(component)):
                raise FieldError(f"{name} must be finite")

    def components(self) -> tuple[np.ndarray, np.ndarray]:
        return self.g1, self.g2

    def magnitude_sq(self) -> np.ndarray:
        return self.g1**2 + self.g2**2

    def eval(self, fn: Callable[["GradientField"], np.ndarray]) -> CellField:
        """Evaluate a per-cell quantity such as ``eps + |g|^2``."""
        return CellField(self.grid, fn(self))


Integrand = Callable[[GradientField], np.ndarray]
CellSource = Union[GradientField, CellField]


def cell_gradient(scalar: ScalarField) -> GradientField:
    v = scalar.values
    h = scalar.grid.h
    sw, se = v[:-1, :-1], v[:-1, 1:]
    nw, ne = v[1:, :-1], v[1:, 1:]
    g1 = (se - sw + ne - nw) / (2.0 * h)
    g2 = (nw - sw + ne - se) / (2.0 * h)
    return GradientField(scalar.grid, _frozen(g1), _frozen(g2))


def node_derivative(scalar: ScalarField, j: int) -> ScalarField:
    """Partial derivative along axis ``j``: centered inside, second-order one-sided at the edge."""
    if j not in (1, 2):
        raise FieldError(f"axis must be 1 or 2, got {j!r}")
    axis = 1 if j == 1 else 0
    return ScalarField(
        scalar.grid, np.gradient(scalar.values, scalar.grid.h, axis=axis, edge_order=2)
    )


def ball_area(ball: BallSpec) -> float:
    return math.pi * ball.radius**2


def _cell_values(source: CellSource, integrand: Integrand | None) -> np.ndarray:
    if integrand is not None:
        if not isinstance(source, GradientField):
            raise FieldError("an integrand needs a gradient field as its source")
        return np.asarray(integrand(source), dtype=np.float64)
    if isinstance(source, CellField):
        return source.values
    raise FieldError("integrating a gradient field requires an integrand")


def integrate_region(source: CellSource, mask: np.ndarray, integrand: Integrand | None = None) -> float:
    values = _cell_values(source, integrand)
    if not mask.any():
        raise FieldError("integration region contains no cell centers")
    return float(np.sum(values[mask])) * source.grid.h**2


def integrate_ball(
    source: CellSource,
    ball: BallSpec,
    integrand: Integrand | None = None,
    *,
    average: bool = False,
) -> float:
    """Cell-center membership quadrature over ``ball``.

    With ``average=True`` the integral is divided by the continuum area
    ``pi * radius**2`` rather than the covered cell area.
    """
    try:
        total = integrate_region(source, cell_ball_mask(source.grid, ball), integrand)
    except FieldError as exc:
        raise FieldError(f"ball of radius {ball.radius:g}: {exc}") from exc
    return total / ball_area(ball) if average else total


def integrate_annulus(
    source: CellSource, inner: BallSpec, outer: BallSpec, integrand: Integrand | None = None
) -> float:
    grid = source.grid
    mask = cell_ball_mask(grid, outer) & ~cell_ball_mask(grid, inner)
    return integrate_region(source, mask, integrand)


def oscillation(scalar: ScalarField, ball: BallSpec) -> float:
    mask = ball_mask(scalar.grid, ball)
    if not mask.any():
        raise FieldError(f"ball of radius {ball.radius:g} contains no nodes")
    values = scalar.values[mask]
    return float(values.max() - values.min())


def lp_gradient_norm(scalar: ScalarField, ball: BallSpec, p: float) -> float:
    """Integral of ``|grad v|^p`` over the ball (not its p-th root)."""
    if not 1.0 < p < 2.0:
        raise ParameterError(f"exponent p must lie in (1, 2), got {p!r}")
    return integrate_ball(cell_gradient(scalar), ball, lambda g: g.magnitude_sq() ** (0.5 * p))
