"""Newton-CG minimization of the regularized energy and the eps-continuation ladder."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.sparse.linalg import LinearOperator, cg

from orthotropic_shared.energy import EnergyParams, LinearizedOperator, energy, energy_change, residual
from orthotropic_shared.errors import FieldError, LadderError, ParameterError
from orthotropic_shared.fields import CellField, ScalarField, cell_gradient, integrate_ball
from orthotropic_shared.geometry import BallSpec, Grid, ball_mask
from orthotropic_shared.reports import EstimateReport, bound_report

logger = logging.getLogger(__name__)

LADDER_RATIO = 4.0
CAUCHY_FACTOR = 1.5
# Fraction of the quadratic-model decrease a full Newton step must realize.
FULL_STEP_AGREEMENT = 0.5


@dataclass(frozen=True)
class SolveConfig:
    tol_residual: float = 1e-10
    max_newton: int = 500
    max_cg: int = 2000
    armijo_slope: float = 1e-4
    armijo_shrink: float = 0.5
    cg_rtol: float = 1e-8
    max_backtracks: int = 40

    def __post_init__(self) -> None:
        if not self.tol_residual > 0.0:
            raise ParameterError(f"tol_residual must be positive, got {self.tol_residual!r}")
        if self.max_newton < 1 or self.max_cg < 1 or self.max_backtracks < 1:
            raise ParameterError("iteration caps must be at least 1")
        if not 0.0 < self.armijo_slope <= 0.5:
            raise ParameterError(f"Armijo slope fraction must lie in (0, 1/2], got {self.armijo_slope!r}")
        if not 0.0 < self.armijo_shrink < 1.0:
            raise ParameterError(f"Armijo shrink factor must lie in (0, 1), got {self.armijo_shrink!r}")


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    residual_sup: float
    energy: float
    energy_history: tuple[float, ...]
    converged: bool
    message: str
    cg_iterations: int = 0
    picard_steps: int = 0
    wall_time: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "residual_sup": self.residual_sup,
            "energy": self.energy,
            "energy_history": list(self.energy_history),
            "converged": self.converged,
            "message": self.message,
            "cg_iterations": self.cg_iterations,
            "picard_steps": self.picard_steps,
            "wall_time": self.wall_time,
        }


@dataclass(frozen=True)
class LadderReport:
    """Per-level statistics of an eps ladder.

    ``sup_differences[k]`` is the sup-norm of ``u_k - u_{k+1}`` over the
    half ball, ``grad_differences[k]`` the L^p norm of their gradient
    difference over the ball.
    """

    p: float
    radius: float
    eps_values: tuple[float, ...]
    reports: tuple[SolveReport, ...]
    sup_differences: tuple[float, ...]
    grad_differences: tuple[float, ...]
    weighted_gaps: tuple[float, ...]
    exact_errors: tuple[float, ...] = ()
    cauchy_converged: bool = False
    fields: tuple[ScalarField, ...] = field(default=(), repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "radius": self.radius,
            "eps_values": list(self.eps_values),
            "reports": [report.to_dict() for report in self.reports],
            "sup_differences": list(self.sup_differences),
            "grad_differences": list(self.grad_differences),
            "weighted_gaps": list(self.weighted_gaps),
            "exact_errors": list(self.exact_errors),
            "cauchy_converged": self.cauchy_converged,
            "cauchy_criterion": "heuristic: both differences shrink by >= 1.5 over the last two levels",
        }


def coons_interpolation(boundary: ScalarField) -> ScalarField:
    """Transfinite bilinear blend of the four edges; exact on bilinear data."""
    v = boundary.values
    n = boundary.grid.n
    s = np.linspace(0.0, 1.0, n)
    t = s[:, None]
    bottom, top = v[0, :][None, :], v[-1, :][None, :]
    left, right = v[:, 0][:, None], v[:, -1][:, None]
    corners = (
        (1.0 - s) * (1.0 - t) * v[0, 0]
        + s * (1.0 - t) * v[0, -1]
        + (1.0 - s) * t * v[-1, 0]
        + s * t * v[-1, -1]
    )
    blended = (1.0 - t) * bottom + t * top + (1.0 - s) * left + s * right - corners
    return ScalarField(boundary.grid, blended)


def _with_boundary(values: np.ndarray, boundary: ScalarField) -> ScalarField:
    mask = boundary.grid.boundary_mask()
    values = np.array(values, dtype=np.float64)
    values[mask] = boundary.values[mask]
    return ScalarField(boundary.grid, values)


def _newton_direction(
    u: ScalarField,
    params: EnergyParams,
    r_int: np.ndarray,
    interior: np.ndarray,
    cfg: SolveConfig,
    *,
    picard: bool = False,
) -> tuple[np.ndarray, float, int]:
    """Preconditioned CG direction, its curvature ``d.H.d`` and the CG iteration count.

    ``picard=True`` solves with the lagged diffusion operator instead of the Hessian.
    """
    grid = u.grid
    op = LinearizedOperator(u, params, picard=picard)
    diag = op.diagonal()[interior]
    size = r_int.size
    full = np.zeros(grid.shape)

    def matvec(x: np.ndarray) -> np.ndarray:
        full[interior] = np.ravel(x)
        return op.apply(full)[interior]

    hessian = LinearOperator((size, size), matvec=matvec, dtype=np.float64)
    jacobi = LinearOperator((size, size), matvec=lambda x: np.ravel(x) / diag, dtype=np.float64)
    iterations = 0

    def count(_xk: np.ndarray) -> None:
        nonlocal iterations
        iterations += 1

    direction, info = cg(
        hessian, -r_int, rtol=cfg.cg_rtol, maxiter=cfg.max_cg, M=jacobi, callback=count
    )
    if info != 0:
        logger.debug("CG stopped after %d iterations without reaching rtol", iterations)
    if not float(r_int @ direction) < 0.0:
        logger.debug("CG direction is not a descent direction; falling back to scaled gradient")
        direction = -r_int / diag
    return direction, float(direction @ matvec(direction)), iterations


@dataclass(frozen=True)
class _Step:
    iterate: ScalarField
    length: float
    change: float
    kind: str


def _trial(
    u: ScalarField, direction: np.ndarray, interior: np.ndarray, params: EnergyParams, length: float, kind: str
) -> _Step:
    values = u.values.copy()
    values[interior] += length * direction
    moved = ScalarField(u.grid, values)
    return _Step(moved, length, energy_change(u, moved, params), kind)


def _segment_search(
    u: ScalarField,
    direction: np.ndarray,
    interior: np.ndarray,
    params: EnergyParams,
    slope: float,
    cfg: SolveConfig,
) -> _Step | None:
    """Minimize the energy over ``u + t d, t in [0, 1]``, then backtrack to an Armijo step."""
    search = minimize_scalar(
        lambda t: _trial(u, direction, interior, params, t, "newton").change,
        bounds=(0.0, 1.0),
        method="bounded",
    )
    length = float(search.x)
    for _ in range(cfg.max_backtracks):
        step = _trial(u, direction, interior, params, length, "newton")
        if length > 0.0 and step.change <= cfg.armijo_slope * length * slope:
            return step
        length *= cfg.armijo_shrink
    return None


def _next_iterate(
    u: ScalarField, params: EnergyParams, r_int: np.ndarray, interior: np.ndarray, cfg: SolveConfig
) -> tuple[_Step | None, int]:
    """One globalized Newton step and the CG iterations it took.

    The full Newton step is kept when the energy realizes at least
    ``FULL_STEP_AGREEMENT`` of the quadratic-model decrease. Otherwise the
    full Picard step is computed too and the lower of the two admissible
    energies wins. When neither satisfies the Armijo condition the Newton
    direction is searched along ``[0, 1]``.
    """
    newton, curvature, cg_its = _newton_direction(u, params, r_int, interior, cfg)
    slope = float(r_int @ newton)
    full = _trial(u, newton, interior, params, 1.0, "newton")
    model = slope + 0.5 * curvature
    agrees = model < 0.0 and full.change <= FULL_STEP_AGREEMENT * model
    if agrees and full.change <= cfg.armijo_slope * slope:
        return full, cg_its

    picard, _, picard_its = _newton_direction(u, params, r_int, interior, cfg, picard=True)
    lagged = _trial(u, picard, interior, params, 1.0, "picard")
    admissible = [
        step
        for step, direction in ((full, newton), (lagged, picard))
        if step.change <= cfg.armijo_slope * float(r_int @ direction)
    ]
    logger.debug(
        "full Newton step realized %.3e of predicted %.3e; Picard step changed the energy by %.3e",
        full.change, model, lagged.change,
    )
    if admissible:
        return min(admissible, key=lambda step: step.change), cg_its + picard_its
    return _segment_search(u, newton, interior, params, slope, cfg), cg_its + picard_its


def solve_dirichlet(
    grid: Grid,
    boundary: ScalarField,
    params: EnergyParams,
    cfg: SolveConfig | None = None,
    *,
    initial: ScalarField | None = None,
) -> tuple[ScalarField, SolveReport]:
    """Minimize the regularized energy with the boundary values of ``boundary``.

    Returns the best iterate and a report; non-convergence is flagged in the
    report rather than raised.
    """
    cfg = cfg or SolveConfig()
    params.require_regularized("solve_dirichlet")
    if boundary.grid != grid:
        raise FieldError("boundary data lives on a different grid")
    start = time.perf_counter()
    interior = grid.interior_mask()
    seed = initial if initial is not None else coons_interpolation(boundary)
    seed.require_same_grid(boundary)
    u = _with_boundary(seed.values, boundary)

    current = energy(u, params)
    history = [current]
    total_cg = 0
    picard_steps = 0
    converged = False
    message = f"no convergence within {cfg.max_newton} Newton iterations"
    iterations = 0
    r_sup = math.inf

    for iterations in range(cfg.max_newton + 1):
        r_int = residual(u, params).values[interior]
        r_sup = float(np.max(np.abs(r_int))) if r_int.size else 0.0
        if r_sup <= cfg.tol_residual:
            converged = True
            message = "converged"
            break
        if iterations == cfg.max_newton:
            break
        step, cg_its = _next_iterate(u, params, r_int, interior, cfg)
        total_cg += cg_its
        if step is None:
            message = "line-search stagnation"
            logger.warning("line search stagnated at iteration %d (residual %.3e)", iterations, r_sup)
            break

        u = step.iterate
        if step.kind == "picard":
            picard_steps += 1
        # Energies are accumulated from cell-wise changes.
        current = current + step.change
        history.append(current)
        logger.debug(
            "%s it=%d energy=%.12e residual=%.3e cg=%d step=%.3g",
            step.kind, iterations + 1, current, r_sup, cg_its, step.length,
        )

    report = SolveReport(
        iterations=iterations,
        residual_sup=r_sup,
        energy=current,
        energy_history=tuple(history),
        converged=converged,
        message=message,
        cg_iterations=total_cg,
        picard_steps=picard_steps,
        wall_time=time.perf_counter() - start,
    )
    level = logging.INFO if converged else logging.WARNING
    logger.log(
        level, "solve p=%g eps=%.3e n=%d: %s after %d iterations (residual %.3e)",
        params.p, params.eps, grid.n, message, iterations, r_sup,
    )
    return u, report


def ladder_eps_values(eps0: float, levels: int) -> tuple[float, ...]:
    return tuple(eps0 * LADDER_RATIO ** (-k) for k in range(levels))


def _weighted_gap(a: ScalarField, b: ScalarField, eps: float, p: float, ball: BallSpec) -> float:
    ga, gb = cell_gradient(a), cell_gradient(b)
    density = np.zeros(a.grid.cell_shape)
    for ca, cb in ((ga.g1, gb.g1), (ga.g2, gb.g2)):
        density += (eps + ca**2 + cb**2) ** (0.5 * (p - 2.0)) * (ca - cb) ** 2
    return integrate_ball(CellField(a.grid, density), ball)


def _differences(
    a: ScalarField, b: ScalarField, eps: float, p: float, ball: BallSpec
) -> tuple[float, float, float]:
    diff = ScalarField(a.grid, a.values - b.values)
    sup = diff.sup_norm(ball_mask(a.grid, ball.scaled(0.5)))
    grad = integrate_ball(cell_gradient(diff), ball, lambda g: g.magnitude_sq() ** (0.5 * p)) ** (1.0 / p)
    return sup, grad, _weighted_gap(a, b, eps, p, ball)


def default_ladder_ball(grid: Grid) -> BallSpec:
    return BallSpec(0.4 * grid.side)


def epsilon_ladder(
    grid: Grid,
    boundary: ScalarField,
    p: float,
    eps0: float,
    levels: int,
    cfg: SolveConfig | None = None,
    *,
    ball: BallSpec | None = None,
    exact: ScalarField | None = None,
) -> tuple[ScalarField, LadderReport]:
    """Solve with eps_k = eps0 * 4^-k, warm-starting each level from the previous one."""
    if levels < 2:
        raise LadderError(f"a ladder needs at least 2 levels, got {levels}")
    if not eps0 > 0.0:
        raise LadderError(f"eps0 must be positive, got {eps0!r}")
    ball = ball or default_ladder_ball(grid)
    ball.check_on(grid)
    eps_values = ladder_eps_values(eps0, levels)
    fields: list[ScalarField] = []
    reports: list[SolveReport] = []
    current: ScalarField | None = None
    for k, eps in enumerate(eps_values):
        current, report = solve_dirichlet(grid, boundary, EnergyParams(p, eps), cfg, initial=current)
        if not report.converged:
            raise LadderError(f"ladder level {k} (eps={eps:.3e}) failed: {report.message}")
        logger.info("ladder level %d eps=%.3e: %d Newton iterations", k, eps, report.iterations)
        fields.append(current)
        reports.append(report)

    report = summarize_ladder(fields, eps_values, p, ball, reports=reports, exact=exact)
    return fields[-1], report


def continuation_solve(
    grid: Grid,
    boundary: ScalarField,
    p: float,
    eps: float,
    eps0: float,
    cfg: SolveConfig | None = None,
) -> tuple[ScalarField, SolveReport]:
    """Walk the eps0 * 4^-k ladder down to ``eps`` and return the last level.

    When ``eps`` is itself a ladder value the result matches
    :func:`epsilon_ladder` bitwise.
    """
    if not (eps > 0.0 and eps0 > 0.0):
        raise LadderError(f"continuation needs eps > 0 and eps0 > 0, got eps={eps!r} eps0={eps0!r}")
    steps: list[float] = []
    k = 0
    while True:
        level = eps0 * LADDER_RATIO ** (-k)
        if level <= eps * (1.0 + 1e-12):
            steps.append(eps)
            break
        steps.append(level)
        k += 1
    current: ScalarField | None = None
    report: SolveReport | None = None
    for level in steps:
        current, report = solve_dirichlet(grid, boundary, EnergyParams(p, level), cfg, initial=current)
        if not report.converged:
            raise LadderError(f"continuation level eps={level:.3e} failed: {report.message}")
    assert current is not None and report is not None
    return current, report


def summarize_ladder(
    fields: Sequence[ScalarField],
    eps_values: Sequence[float],
    p: float,
    ball: BallSpec,
    *,
    reports: Sequence[SolveReport] = (),
    exact: ScalarField | None = None,
) -> LadderReport:
    """Consecutive-level statistics of already solved ladder fields."""
    if len(fields) != len(eps_values) or len(fields) < 2:
        raise LadderError(
            f"ladder needs matching fields and eps values (at least 2), got {len(fields)} and {len(eps_values)}"
        )
    sups, grads, gaps = [], [], []
    for k in range(len(fields) - 1):
        fields[k].require_same_grid(fields[k + 1])
        sup, grad, gap = _differences(fields[k], fields[k + 1], eps_values[k + 1], p, ball)
        sups.append(sup)
        grads.append(grad)
        gaps.append(gap)
    errors: tuple[float, ...] = ()
    if exact is not None:
        exact.require_same_grid(fields[0])
        errors = tuple(float(np.max(np.abs(f.values - exact.values))) for f in fields)

    cauchy = len(sups) >= 2 and all(
        seq[-1] * CAUCHY_FACTOR <= seq[-2] for seq in (sups, grads)
    )
    return LadderReport(
        p=p,
        radius=ball.radius,
        eps_values=tuple(eps_values),
        reports=tuple(reports),
        sup_differences=tuple(sups),
        grad_differences=tuple(grads),
        weighted_gaps=tuple(gaps),
        exact_errors=errors,
        cauchy_converged=cauchy,
        fields=tuple(fields),
    )


def random_competitors(
    solution: ScalarField,
    count: int,
    amplitudes: Sequence[float] = (1e-3, 1e-2, 1e-1, 1.0),
    seed: int = 0,
) -> list[ScalarField]:
    """Seeded interior perturbations sharing the boundary values of ``solution``."""
    rng = np.random.default_rng(seed)
    interior = solution.grid.interior_mask()
    competitors = []
    for k in range(count):
        amplitude = amplitudes[k % len(amplitudes)]
        values = solution.values.copy()
        values[interior] += amplitude * rng.uniform(-1.0, 1.0, size=int(interior.sum()))
        competitors.append(ScalarField(solution.grid, values))
    return competitors


def minimality_check(
    solution: ScalarField,
    competitors: Sequence[ScalarField],
    params: EnergyParams,
    *,
    slack: float = 1e-10,
) -> EstimateReport:
    """The minimizer's energy must not exceed any same-boundary competitor's."""
    if not competitors:
        raise FieldError("minimality check needs at least one competitor")
    boundary = solution.grid.boundary_mask()
    own = energy(solution, params)
    energies = []
    for competitor in competitors:
        solution.require_same_grid(competitor)
        if not np.array_equal(competitor.values[boundary], solution.values[boundary]):
            raise FieldError("competitor boundary values differ from the solution's")
        energies.append(energy(competitor, params))
    lowest = min(energies)
    return bound_report(
        "minimality",
        own,
        lowest,
        slack,
        p=params.p,
        eps=params.eps,
        n=solution.grid.n,
        competitors=len(competitors),
        worst_margin=lowest - own,
    )
