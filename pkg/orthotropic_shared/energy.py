"""Regularized orthotropic energy, its first variation and its linearization.

All quantities use one-point quadrature on the cell-average gradient, so the
energy, the residual and the Hessian action are exact derivatives of one
another at the discrete level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from orthotropic_shared.errors import FieldError, ParameterError, SingularEvaluationError
from orthotropic_shared.fields import CellField, ScalarField, cell_gradient, integrate_ball
from orthotropic_shared.geometry import BallSpec, Grid


@dataclass(frozen=True)
class EnergyParams:
    p: float
    eps: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.p) and 1.0 < self.p < 2.0):
            raise ParameterError(f"exponent p must lie strictly in (1, 2), got {self.p!r}")
        if not math.isfinite(self.eps) or self.eps < 0.0:
            raise ParameterError(f"regularization eps must be finite and >= 0, got {self.eps!r}")
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "eps", float(self.eps))

    def with_eps(self, eps: float) -> "EnergyParams":
        return replace(self, eps=eps)

    def require_regularized(self, operation: str) -> None:
        if self.eps <= 0.0:
            raise ParameterError(f"{operation} needs eps > 0, got eps={self.eps!r}")


def axis_density(g: np.ndarray, params: EnergyParams) -> np.ndarray:
    return (g**2 + params.eps) ** (0.5 * params.p) / params.p


def axis_flux(g: np.ndarray, params: EnergyParams) -> np.ndarray:
    """``(g^2 + eps)^((p-2)/2) g``, the derivative of :func:`axis_density`."""
    if params.eps == 0.0:
        if np.any(g == 0.0):
            raise SingularEvaluationError(
                "degenerate flux |g|^(p-2) g evaluated at a vanishing gradient component with eps=0"
            )
        return np.abs(g) ** (params.p - 2.0) * g
    return (g**2 + params.eps) ** (0.5 * (params.p - 2.0)) * g


def axis_weight(g: np.ndarray, params: EnergyParams) -> np.ndarray:
    """Coefficient ``(eps+g^2)^((p-4)/2) (eps+(p-1) g^2)`` of the derivative equation."""
    g2 = g**2
    return (g2 + params.eps) ** (0.5 * (params.p - 4.0)) * (params.eps + (params.p - 1.0) * g2)


def scatter_fluxes(grid: Grid, f1: np.ndarray, f2: np.ndarray) -> np.ndarray:
    """Distribute per-cell fluxes to the four corners with the cell-gradient signs."""
    out = np.zeros(grid.shape)
    out[:-1, :-1] += -f1 - f2
    out[:-1, 1:] += f1 - f2
    out[1:, :-1] += -f1 + f2
    out[1:, 1:] += f1 + f2
    return out


def energy(scalar: ScalarField, params: EnergyParams, domain: BallSpec | None = None) -> float:
    g = cell_gradient(scalar)
    density = axis_density(g.g1, params) + axis_density(g.g2, params)
    if domain is None:
        return float(np.sum(density)) * scalar.grid.h**2
    return integrate_ball(CellField(scalar.grid, density), domain)


def energy_change(before: ScalarField, after: ScalarField, params: EnergyParams) -> float:
    """``energy(after) - energy(before)`` accumulated cell by cell.

    Each cell contributes ``B^(p/2) expm1((p/2) log1p((b^2 - a^2)/B)) / p`` per
    axis with ``B = a^2 + eps``, so tiny changes keep their relative accuracy
    instead of cancelling between two O(1) totals.
    """
    before.require_same_grid(after)
    ga, gb = cell_gradient(before), cell_gradient(after)
    half_p = 0.5 * params.p
    total = 0.0
    for a, b in ((ga.g1, gb.g1), (ga.g2, gb.g2)):
        base = a**2 + params.eps
        positive = base > 0.0
        safe = np.where(positive, base, 1.0)
        with np.errstate(divide="ignore"):
            growth = np.expm1(half_p * np.log1p((b - a) * (b + a) / safe))
        change = np.where(positive, safe**half_p * growth / params.p, axis_density(b, params))
        total += float(np.sum(change))
    return total * before.grid.h**2


def residual(scalar: ScalarField, params: EnergyParams) -> ScalarField:
    """Gradient of the discrete energy w.r.t. nodal values; zero on Dirichlet nodes."""
    grid = scalar.grid
    g = cell_gradient(scalar)
    half_h = 0.5 * grid.h
    values = scatter_fluxes(grid, half_h * axis_flux(g.g1, params), half_h * axis_flux(g.g2, params))
    values[grid.boundary_mask()] = 0.0
    return ScalarField(grid, values)


def secant_weight(g: np.ndarray, params: EnergyParams) -> np.ndarray:
    """Lagged diffusion coefficient ``(g^2 + eps)^((p-2)/2)``, never below :func:`axis_weight`."""
    return (g**2 + params.eps) ** (0.5 * (params.p - 2.0))


class LinearizedOperator:
    """Second variation of the regularized energy, frozen at a base field.

    With ``picard=True`` the coefficients are the lagged diffusion weights
    instead. Their quadratic form majorizes the energy around ``base`` (each
    axis density is concave in ``g^2`` for p < 2), so a full step of the
    resulting Picard iteration never increases the energy.
    """

    def __init__(self, base: ScalarField, params: EnergyParams, *, picard: bool = False) -> None:
        params.require_regularized("the Hessian")
        self.grid = base.grid
        g = cell_gradient(base)
        weight = secant_weight if picard else axis_weight
        self.w1 = weight(g.g1, params)
        self.w2 = weight(g.g2, params)
        self._boundary = self.grid.boundary_mask()

    def apply(self, direction: np.ndarray) -> np.ndarray:
        h = self.grid.h
        d = np.asarray(direction, dtype=np.float64).reshape(self.grid.shape)
        sw, se = d[:-1, :-1], d[:-1, 1:]
        nw, ne = d[1:, :-1], d[1:, 1:]
        d1 = (se - sw + ne - nw) / (2.0 * h)
        d2 = (nw - sw + ne - se) / (2.0 * h)
        out = scatter_fluxes(self.grid, 0.5 * h * self.w1 * d1, 0.5 * h * self.w2 * d2)
        out[self._boundary] = 0.0
        return out

    def diagonal(self) -> np.ndarray:
        quarter = 0.25 * (self.w1 + self.w2)
        diag = np.zeros(self.grid.shape)
        diag[:-1, :-1] += quarter
        diag[:-1, 1:] += quarter
        diag[1:, :-1] += quarter
        diag[1:, 1:] += quarter
        return diag


def _require_zero_boundary(scalar: ScalarField, role: str) -> None:
    if np.any(scalar.boundary_values() != 0.0):
        raise FieldError(f"{role} must vanish on the boundary nodes")


def hessian_apply(scalar: ScalarField, params: EnergyParams, direction: ScalarField) -> ScalarField:
    scalar.require_same_grid(direction)
    _require_zero_boundary(direction, "Hessian direction")
    return ScalarField(scalar.grid, LinearizedOperator(scalar, params).apply(direction.values))


def derivative_integrand(
    dfield: ScalarField, base: ScalarField, params: EnergyParams, testfn: ScalarField
) -> CellField:
    """Per-cell integrand of the linear equation satisfied by a derivative field."""
    params.require_regularized("the derivative equation")
    base.require_same_grid(dfield)
    base.require_same_grid(testfn)
    _require_zero_boundary(testfn, "test function")
    g = cell_gradient(base)
    dd = cell_gradient(dfield)
    dt = cell_gradient(testfn)
    terms = axis_weight(g.g1, params) * dd.g1 * dt.g1 + axis_weight(g.g2, params) * dd.g2 * dt.g2
    return CellField(base.grid, terms)


def derivative_residual(
    dfield: ScalarField, base: ScalarField, params: EnergyParams, testfn: ScalarField
) -> float:
    terms = derivative_integrand(dfield, base, params, testfn)
    return float(np.sum(terms.values)) * base.grid.h**2
