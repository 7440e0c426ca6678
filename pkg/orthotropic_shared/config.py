"""Run configuration: one key-value JSON file, optionally overridden key by key."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable, Mapping

from orthotropic_shared.errors import ConfigError, OrthotropicError
from orthotropic_shared.geometry import BallSpec, Grid, build_grid
from orthotropic_shared.scenarios import SCENARIO_NAMES, SUITE_NAME
from orthotropic_shared.solver import SolveConfig
from orthotropic_shared.verify import (
    CONVERGENCE_SLACK,
    EXACT_FRACTION,
    LEBESGUE_TOLERANCE,
    MIN_RADIUS_CELLS,
    MONOTONICITY_TOLERANCE,
    STABILITY_TOLERANCE,
    radii_ladder,
)

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCES: dict[str, float] = {
    "lebesgue": LEBESGUE_TOLERANCE,
    "stability": STABILITY_TOLERANCE,
    "maxmin": 0.0,
    "convergence": CONVERGENCE_SLACK,
    "monotonicity": MONOTONICITY_TOLERANCE,
    "minimality": 1e-10,
    "exact": EXACT_FRACTION,
}
SWEEP_KEYS = ("p", "eps", "n")


@dataclass(frozen=True)
class RunConfig:
    p: float = 1.5
    eps0: float = 1e-2
    levels: int = 6
    n: tuple[int, ...] = (65, 129)
    side: float = 2.0
    R: float = 0.8
    radii_count: int = 8
    radii_min_cells: int = MIN_RADIUS_CELLS
    scenario: str = SUITE_NAME
    boundary: dict[str, Any] = field(default_factory=dict)
    out: str = "runs"
    seed: int = 0
    tolerances: dict[str, float] = field(default_factory=dict)
    center: tuple[float, float] = (0.0, 0.0)
    solve_first: bool = True
    tamper_negative_control: bool = False
    sweep: dict[str, list[Any]] = field(default_factory=dict)
    tol_residual: float = 1e-10
    max_newton: int = 500
    max_cg: int = 2000

    def __post_init__(self) -> None:
        n_values = (self.n,) if isinstance(self.n, int) else tuple(self.n)
        object.__setattr__(self, "n", n_values)
        object.__setattr__(self, "center", tuple(self.center))
        if not n_values:
            raise ConfigError("n must list at least one resolution")
        if not (isinstance(self.p, (int, float)) and 1.0 < self.p < 2.0):
            raise ConfigError(f"p must lie strictly in (1, 2), got {self.p!r}")
        if not (isinstance(self.eps0, (int, float)) and math.isfinite(self.eps0) and self.eps0 > 0.0):
            raise ConfigError(f"eps0 must be positive, got {self.eps0!r}")
        if not isinstance(self.levels, int) or self.levels < 2:
            raise ConfigError(f"levels must be an integer >= 2, got {self.levels!r}")
        if self.scenario not in SCENARIO_NAMES + (SUITE_NAME,):
            raise ConfigError(
                f"unknown scenario {self.scenario!r}; expected one of {SCENARIO_NAMES + (SUITE_NAME,)}"
            )
        if self.radii_min_cells < MIN_RADIUS_CELLS:
            raise ConfigError(f"radii_min_cells must be at least {MIN_RADIUS_CELLS} (r >= 4h)")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown tolerance keys {sorted(unknown)}; expected {sorted(DEFAULT_TOLERANCES)}")
        unknown = set(self.sweep) - set(SWEEP_KEYS)
        if unknown:
            raise ConfigError(f"unknown sweep keys {sorted(unknown)}; expected {list(SWEEP_KEYS)}")
        for n in n_values:
            try:
                grid = self.grid(n)
                BallSpec(self.R).check_on(grid)
                radii_ladder(grid, self.R, self.radii_count, self.radii_min_cells)
            except OrthotropicError as exc:
                raise ConfigError(f"n={n}: {exc}") from exc
        try:
            self.solve_config()
        except OrthotropicError as exc:
            raise ConfigError(str(exc)) from exc

    def grid(self, n: int) -> Grid:
        return build_grid(n, self.side, self.center)

    def solve_config(self) -> SolveConfig:
        return SolveConfig(
            tol_residual=self.tol_residual, max_newton=self.max_newton, max_cg=self.max_cg
        )

    def tolerance(self, name: str) -> float:
        return float(self.tolerances.get(name, DEFAULT_TOLERANCES[name]))

    def sweep_values(self, key: str) -> list[Any]:
        defaults = {"p": [self.p], "eps": [self.eps0 * 4.0 ** -(self.levels - 1)], "n": list(self.n)}
        return list(self.sweep.get(key, defaults[key]))

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["n"] = list(self.n)
        data["center"] = list(self.center)
        return data


def config_keys() -> list[str]:
    return [f.name for f in fields(RunConfig)]


def _check_keys(data: Mapping[str, Any], origin: str) -> None:
    unknown = sorted(set(data) - set(config_keys()))
    if unknown:
        raise ConfigError(f"{origin}: unknown config keys {unknown}")


def parse_override(item: str) -> tuple[str, Any]:
    """Parse ``KEY=VALUE``; the value is read as JSON, falling back to a plain string."""
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise ConfigError(f"override {item!r} must look like KEY=VALUE")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def build_config(data: Mapping[str, Any], origin: str = "config") -> RunConfig:
    _check_keys(data, origin)
    try:
        return RunConfig(**dict(data))
    except TypeError as exc:
        raise ConfigError(f"{origin}: {exc}") from exc


def load_config(
    path: str | Path | None = None,
    overrides: Mapping[str, Any] | None = None,
    settings: Iterable[str] = (),
) -> RunConfig:
    """Read a JSON config file and apply overrides; without a file the defaults apply."""
    data: dict[str, Any] = {}
    origin = "defaults"
    if path is not None:
        origin = str(path)
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file {path} does not exist") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        _check_keys(data, origin)
    for item in settings:
        key, value = parse_override(item)
        data[key] = value
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    config = build_config(data, origin)
    logger.debug("resolved config from %s: %s", origin, config.to_dict())
    return config
