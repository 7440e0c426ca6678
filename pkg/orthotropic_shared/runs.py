"""Solve, verify and sweep runs: job fan-out, artifacts and exit codes.

Every job touches only its own output subdirectory. Jobs run inline or on a
process pool sized by ``ORTHOTROPIC_WORKERS``; results are merged in job
order so outputs do not depend on the worker count.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Sequence, TypeVar

from orthotropic_shared.config import RunConfig
from orthotropic_shared.energy import EnergyParams
from orthotropic_shared.errors import (
    ArtifactError,
    ConfigError,
    LadderError,
    MonotonicityViolation,
    OrthotropicError,
    SolverError,
)
from orthotropic_shared.fields import ScalarField, node_derivative
from orthotropic_shared.geometry import BallSpec, make_cutoff
from orthotropic_shared.reports import SUMMARY_COLUMNS, EstimateReport
from orthotropic_shared.scenarios import (
    SUITE_NAME,
    Scenario,
    affine_function,
    expand_scenarios,
    make_scenario,
    sweep_scenarios,
)
from orthotropic_shared.snapshots import read_snapshot, write_snapshot
from orthotropic_shared.solver import (
    continuation_solve,
    epsilon_ladder,
    ladder_eps_values,
    minimality_check,
    random_competitors,
    summarize_ladder,
)
from orthotropic_shared.verify import (
    ENERGY_STABILITY_TOLERANCE,
    check_caccioppoli,
    check_convergence,
    check_derivative_equation,
    check_energy_estimate,
    check_exact_error,
    check_exact_refinement,
    check_exact_trend,
    check_grad_l2,
    check_lebesgue,
    check_lipschitz,
    check_maxmin,
    check_theorem,
    check_weight_gradient,
    lebesgue_radii,
    measure_caccioppoli,
    measure_derivative_equation,
    measure_energy_estimate,
    measure_grad_l2,
    measure_lipschitz,
    measure_weight_gradient,
    negative_control,
    oscillation_profile,
    radii_ladder,
    standard_test_functions,
    sweep_monotonicity_inequality,
)

logger = logging.getLogger(__name__)

WORKERS_ENV = "ORTHOTROPIC_WORKERS"
EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_FAILURE = 2

FIELD_FILE = "field.txt"
SOLVE_FILE = "solve.json"
LADDER_FILE = "ladder.json"
REPORTS_FILE = "reports.json"
SUMMARY_FILE = "summary.csv"
SWEEP_FILE = "sweep.csv"
SWEEP_COLUMNS = ("check", "scenario", "p", "eps", "n", "r", "ratio")

COMPETITORS = 100
MAXMIN_BALLS = 5
MONOTONICITY_EPS = (0.0, 0.1, 1.0)
MIN_CONVERGENCE_LEVELS = 4

T = TypeVar("T")
V = TypeVar("V")


@dataclass
class RunOutcome:
    exit_code: int
    message: str
    artifacts: list[str] = field(default_factory=list)
    payload: dict[str, Any] = field(default_factory=dict)

    @property
    def status(self) -> str:
        if self.exit_code == EXIT_OK:
            return "success"
        return "failed" if self.exit_code == EXIT_FAILURE else "error"

    def to_dict(self) -> dict[str, Any]:
        return {
            "status": self.status,
            "exit_code": self.exit_code,
            "message": self.message,
            "artifacts": self.artifacts,
            **self.payload,
        }


def exit_code_for(exc: OrthotropicError) -> int:
    """Solver and verification failures map to 2, input problems to 1."""
    if isinstance(exc, (LadderError, SolverError, MonotonicityViolation)):
        return EXIT_FAILURE
    return EXIT_CONFIG


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        count = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from exc
    if count < 1:
        raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {count}")
    return count


def run_jobs(fn: Callable[[T], V], jobs: Sequence[T]) -> list[V]:
    workers = min(worker_count(), len(jobs))
    if workers <= 1:
        return [fn(job) for job in jobs]
    logger.info("running %d jobs on %d workers", len(jobs), workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def eps_label(eps: float) -> str:
    return f"{eps:.6e}"


def scenario_dir(config: RunConfig, label: str) -> Path:
    return Path(config.out) / label


def level_dir(config: RunConfig, label: str, n: int, eps: float) -> Path:
    return scenario_dir(config, label) / str(n) / eps_label(eps)


def write_json(path: Path, payload: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    logger.info("wrote %s", path)
    return path


@dataclass(frozen=True)
class Job:
    config: RunConfig
    scenario: str
    p: float
    parameters: dict[str, Any]
    n: int = 0
    eps: float = 0.0

    def build_scenario(self) -> Scenario:
        return make_scenario(self.scenario, self.p, self.parameters)


def _scenario_jobs(config: RunConfig) -> list[Job]:
    return [
        Job(config, s.name, s.p, dict(s.parameters))
        for s in expand_scenarios(config.scenario, config.p, config.boundary)
    ]


def solve_job(job: Job) -> dict[str, Any]:
    config = job.config
    scenario = job.build_scenario()
    grid = config.grid(job.n)
    _, ladder = epsilon_ladder(
        grid,
        scenario.boundary(grid),
        scenario.p,
        config.eps0,
        config.levels,
        config.solve_config(),
        ball=BallSpec(config.R),
        exact=scenario.exact_solution(grid),
    )
    artifacts = []
    for eps, solved, report in zip(ladder.eps_values, ladder.fields, ladder.reports):
        directory = level_dir(config, scenario.label, job.n, eps)
        artifacts.append(str(write_snapshot(directory / FIELD_FILE, solved, EnergyParams(scenario.p, eps))))
        payload = {
            "scenario": scenario.describe(),
            "grid": grid.describe(),
            "eps": eps,
            "report": report.to_dict(),
            "config": config.to_dict(),
        }
        artifacts.append(str(write_json(directory / SOLVE_FILE, payload)))
    ladder_path = scenario_dir(config, scenario.label) / str(job.n) / LADDER_FILE
    artifacts.append(str(write_json(ladder_path, {**ladder.to_dict(), "config": config.to_dict()})))
    logger.info("solved %s n=%d over %d eps levels", scenario.label, job.n, len(ladder.eps_values))
    return {"scenario": scenario.label, "n": job.n, "ladder": ladder.to_dict(), "artifacts": artifacts}


def cmd_solve(config: RunConfig) -> RunOutcome:
    """Solve every scenario at every resolution along the eps ladder."""
    try:
        jobs = [replace(job, n=n) for job in _scenario_jobs(config) for n in config.n]
        results = run_jobs(solve_job, jobs)
    except OrthotropicError as exc:
        logger.error("solve failed: %s", exc)
        return RunOutcome(exit_code_for(exc), str(exc))
    artifacts = [path for result in results for path in result["artifacts"]]
    runs = [{"scenario": r["scenario"], "n": r["n"], "ladder": r["ladder"]} for r in results]
    return RunOutcome(EXIT_OK, f"solved {len(jobs)} scenario/resolution job(s)", artifacts, {"runs": runs})


def load_ladder_fields(config: RunConfig, scenario: Scenario, n: int) -> list[ScalarField]:
    """Read one resolution's ladder snapshots back onto the configured grid."""
    grid = config.grid(n)
    loaded = []
    for eps in ladder_eps_values(config.eps0, config.levels):
        path = level_dir(config, scenario.label, n, eps) / FIELD_FILE
        snapshot = read_snapshot(path, center=config.center)
        if snapshot.field.grid.n != n or abs(snapshot.field.grid.h - grid.h) > 1e-12 * grid.h:
            raise ArtifactError(f"snapshot {path} does not match the configured grid n={n} side={config.side:g}")
        loaded.append(ScalarField(grid, snapshot.field.values))
    return loaded


def _worst(reports: Sequence[EstimateReport], name: str) -> EstimateReport:
    worst = max(reports, key=lambda report: report.ratio)
    passed = all(report.passed for report in reports)
    context = {**worst.context, "checked": len(reports)}
    return replace(worst, name=name, passed=passed, context=context)


def verify_scenario(config: RunConfig, scenario: Scenario) -> dict[str, Any]:
    """Run every check on one scenario's stored ladders.

    The primary field is the smallest-eps solution on the finest grid; the
    next-smallest eps and the next-coarser grid serve as stability references.
    """
    resolutions = sorted(set(config.n))
    fine_n = resolutions[-1]
    coarse_n = resolutions[-2] if len(resolutions) > 1 else None
    eps_values = ladder_eps_values(config.eps0, config.levels)
    p = scenario.p
    radius = config.R

    grid = config.grid(fine_n)
    ladder_fields = load_ladder_fields(config, scenario, fine_n)
    u = ladder_fields[-1]
    params = EnergyParams(p, eps_values[-1])
    previous = (ladder_fields[-2], EnergyParams(p, eps_values[-2]))
    references = [previous]
    coarse = None
    coarse_grid = None
    if coarse_n is not None:
        coarse_grid = config.grid(coarse_n)
        coarse = load_ladder_fields(config, scenario, coarse_n)[-1]
        references.append((coarse, params))
    radii = radii_ladder(coarse_grid or grid, radius, config.radii_count, config.radii_min_cells)
    stability = config.tolerance("stability")
    exact = scenario.exact_solution(grid)

    ladder = summarize_ladder(ladder_fields, eps_values, p, BallSpec(radius), exact=exact)

    reports: list[EstimateReport] = []
    competitors = random_competitors(u, COMPETITORS, seed=config.seed)
    reports.append(minimality_check(u, competitors, params, slack=config.tolerance("minimality")))
    if exact is not None:
        reports.append(check_exact_error(u, exact, fraction=config.tolerance("exact")))
        reports.append(check_exact_trend(ladder.exact_errors, slack=config.tolerance("convergence")))
        if coarse is not None and coarse_grid is not None:
            reports.append(
                check_exact_refinement(
                    u,
                    exact,
                    coarse,
                    scenario.exact_solution(coarse_grid),
                    ladder_errors=ladder.exact_errors,
                )
            )

    balls = [BallSpec(r) for r in radii_ladder(grid, radius, MAXMIN_BALLS, config.radii_min_cells)]
    for j in (1, 2):
        derivative = node_derivative(u, j)
        lebesgue = [
            check_lebesgue(derivative, r, radius, tolerance=config.tolerance("lebesgue"))
            for r in lebesgue_radii(radii, radius)
        ]
        reports.append(_worst(lebesgue, f"lebesgue-j{j}"))
        reports.append(check_maxmin(derivative, balls, tolerance=config.tolerance("maxmin"), name=f"maxmin-j{j}"))

    tampered = None
    if config.tamper_negative_control:
        tampered = ScalarField.from_function(grid, affine_function(), local=True)
    control = negative_control(grid, balls, field=tampered)

    profile, theorem = check_theorem(u, params, radius, radii, references, tolerance=stability)
    reports.append(theorem)
    reports.append(check_lipschitz(u, params, radius, references, tolerance=stability))
    cutoff = make_cutoff(grid, 0.5 * radius, radius)
    reports.append(check_caccioppoli(u, params, cutoff, references, tolerance=stability))
    reports.append(check_weight_gradient(u, params, cutoff, references, tolerance=stability))
    extension = exact if exact is not None else u
    reports.append(check_grad_l2(u, extension, params, radius, [previous], tolerance=stability))
    reports.append(
        check_energy_estimate(u, extension, params, radius, [previous], tolerance=ENERGY_STABILITY_TOLERANCE)
    )

    testfns = standard_test_functions(grid, radius, seed=config.seed)
    coarse_reference = None
    if coarse is not None and coarse_grid is not None:
        coarse_reference = (coarse, params, standard_test_functions(coarse_grid, radius, seed=config.seed))
    reports.append(check_derivative_equation(u, params, testfns, coarse_reference))

    if config.levels >= MIN_CONVERGENCE_LEVELS:
        reports.append(check_convergence(ladder, slack=config.tolerance("convergence")))
    else:
        logger.warning(
            "%s: skipping the convergence check, it needs at least %d ladder levels",
            scenario.label,
            MIN_CONVERGENCE_LEVELS,
        )
    reports.append(
        sweep_monotonicity_inequality(p, MONOTONICITY_EPS, tolerance=config.tolerance("monotonicity"))
    )
    return {
        "scenario": scenario.describe(),
        "reports": reports,
        "negative_control": control,
        "profile": profile.to_dict(),
        "ladder": ladder.to_dict(),
    }


def _write_summary(path: Path, label: str, reports: Sequence[EstimateReport]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(("scenario", *SUMMARY_COLUMNS))
        for report in reports:
            writer.writerow((label, *report.summary_row()))
    logger.info("wrote %s", path)
    return path


def verify_job(job: Job) -> dict[str, Any]:
    config = job.config
    scenario = job.build_scenario()
    result = verify_scenario(config, scenario)
    reports: list[EstimateReport] = result["reports"]
    control: EstimateReport = result["negative_control"]
    directory = scenario_dir(config, scenario.label)
    bundle = {
        "scenario": result["scenario"],
        "config": config.to_dict(),
        "passed": all(report.passed for report in reports),
        "reports": [report.to_dict() for report in reports],
        "negative_control": {**control.to_dict(), "expected": "fail"},
        "profile": result["profile"],
        "ladder": result["ladder"],
    }
    artifacts = [
        str(write_json(directory / REPORTS_FILE, bundle)),
        str(_write_summary(directory / SUMMARY_FILE, scenario.label, [*reports, control])),
    ]
    failed = [report.name for report in reports if not report.passed]
    level = logging.INFO if not failed and not control.passed else logging.WARNING
    logger.log(level, "verified %s: %d checks, failed=%s, negative control passed=%s",
               scenario.label, len(reports), failed, control.passed)
    return {
        "scenario": scenario.label,
        "failed": failed,
        "negative_control_passed": control.passed,
        "reports": bundle["reports"],
        "artifacts": artifacts,
    }


def cmd_verify(config: RunConfig) -> RunOutcome:
    """Run the check suite; exit 0 iff every check passes and every negative control fails."""
    artifacts: list[str] = []
    try:
        if config.solve_first:
            solved = cmd_solve(config)
            if solved.exit_code != EXIT_OK:
                return solved
            artifacts.extend(solved.artifacts)
        results = run_jobs(verify_job, _scenario_jobs(config))
    except OrthotropicError as exc:
        logger.error("verify failed: %s", exc)
        return RunOutcome(exit_code_for(exc), str(exc), artifacts)
    artifacts.extend(path for result in results for path in result["artifacts"])
    failed = [f"{r['scenario']}:{name}" for r in results for name in r["failed"]]
    controls = [r["scenario"] for r in results if r["negative_control_passed"]]
    payload = {
        "scenarios": [
            {"scenario": r["scenario"], "failed": r["failed"], "reports": r["reports"]} for r in results
        ]
    }
    if failed or controls:
        parts = []
        if failed:
            parts.append(f"failed checks: {', '.join(failed)}")
        if controls:
            parts.append(f"negative control unexpectedly passed for: {', '.join(controls)}")
        return RunOutcome(EXIT_FAILURE, "; ".join(parts), artifacts, payload)
    return RunOutcome(EXIT_OK, f"all checks passed on {len(results)} scenario(s)", artifacts, payload)


def sweep_job(job: Job) -> list[list[Any]]:
    config = job.config
    scenario = job.build_scenario()
    grid = config.grid(job.n)
    BallSpec(config.R).check_on(grid)
    u, _ = continuation_solve(
        grid, scenario.boundary(grid), scenario.p, job.eps, config.eps0, config.solve_config()
    )
    params = EnergyParams(scenario.p, job.eps)
    radius = config.R
    radii = radii_ladder(grid, radius, config.radii_count, config.radii_min_cells)
    key = [scenario.label, scenario.p, job.eps, job.n]
    rows: list[list[Any]] = []

    profile = oscillation_profile(u, params, radius, radii)
    for j, measured in zip((1, 2), profile.measured):
        rows.extend([f"theorem-j{j}", *key, r, value] for r, value in zip(radii, measured))
    for j in (1, 2):
        derivative = node_derivative(u, j)
        rows.extend(
            [f"lebesgue-j{j}", *key, r, check_lebesgue(derivative, r, radius).ratio]
            for r in lebesgue_radii(radii, radius)
        )

    exact = scenario.exact_solution(grid)
    extension = exact if exact is not None else u
    cutoff = make_cutoff(grid, 0.5 * radius, radius)
    measures = (
        measure_lipschitz(u, params, radius),
        measure_caccioppoli(u, params, cutoff),
        measure_weight_gradient(u, params, cutoff),
        measure_grad_l2(u, extension, params, radius),
        measure_energy_estimate(u, extension, params, radius),
        measure_derivative_equation(u, params, standard_test_functions(grid, radius, seed=config.seed)),
    )
    rows.extend([report.name, *key, radius, report.ratio] for report in measures)
    logger.info("swept %s p=%g eps=%.3e n=%d: %d rows", scenario.label, scenario.p, job.eps, job.n, len(rows))
    return rows


def sweep_jobs(config: RunConfig) -> list[Job]:
    grid_axes = {key: config.sweep_values(key) for key in ("p", "eps", "n")}
    empty = [key for key, values in grid_axes.items() if not values]
    if empty:
        raise ConfigError(f"sweep parameter grid is empty along {empty}")
    for eps in grid_axes["eps"]:
        if not (isinstance(eps, (int, float)) and eps > 0.0):
            raise ConfigError(f"sweep eps values must be positive, got {eps!r}")
    for n in grid_axes["n"]:
        try:
            BallSpec(config.R).check_on(config.grid(n))
        except OrthotropicError as exc:
            raise ConfigError(f"sweep n={n}: {exc}") from exc
    jobs = []
    for p in grid_axes["p"]:
        parameters = config.boundary if config.scenario != SUITE_NAME else {}
        for scenario in sweep_scenarios(config.scenario, p, parameters):
            for eps in grid_axes["eps"]:
                for n in grid_axes["n"]:
                    jobs.append(Job(config, scenario.name, scenario.p, dict(scenario.parameters), n, float(eps)))
    return jobs


def cmd_sweep(config: RunConfig) -> RunOutcome:
    """Tabulate measured constants over the p x eps x n grid into one CSV."""
    try:
        jobs = sweep_jobs(config)
        results = run_jobs(sweep_job, jobs)
    except OrthotropicError as exc:
        logger.error("sweep failed: %s", exc)
        return RunOutcome(exit_code_for(exc), str(exc))
    path = Path(config.out) / SWEEP_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [row for result in results for row in result]
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(SWEEP_COLUMNS)
        writer.writerows(rows)
    logger.info("wrote %s (%d rows)", path, len(rows))
    return RunOutcome(EXIT_OK, f"swept {len(jobs)} job(s)", [str(path)], {"rows": len(rows)})
