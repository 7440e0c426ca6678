"""Standard boundary-data scenarios used by the runs and the tests."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from orthotropic_shared.errors import ConfigError
from orthotropic_shared.fields import ScalarField
from orthotropic_shared.geometry import Grid

LocalFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]
STANDARD_USTAR_EXPONENTS = (1.2, 1.5, 1.8)
AFFINE_DEFAULT = (3.0, -2.0, 1.0)


def conjugate_exponent(p: float) -> float:
    return p / (p - 1.0)


def affine_function(coefficients: tuple[float, float, float] = AFFINE_DEFAULT) -> LocalFunction:
    a, b, c = coefficients
    return lambda x1, x2: a * x1 + b * x2 + c


def ustar_function(p: float) -> LocalFunction:
    """``|x1|^p' - |x2|^p'``, an exact solution of the degenerate equation."""
    q = conjugate_exponent(p)
    return lambda x1, x2: np.abs(x1) ** q - np.abs(x2) ** q


def oscillatory_function(frequency: float = 2.0 * math.pi) -> LocalFunction:
    return lambda x1, x2: np.sin(frequency * x1) + 0.5 * np.cos(frequency * x2)


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    p: float
    function: LocalFunction = field(repr=False)
    exact: bool = False
    parameters: dict[str, Any] = field(default_factory=dict)

    def boundary(self, grid: Grid) -> ScalarField:
        """Boundary data sampled on all nodes; only the boundary ring is binding."""
        return ScalarField.from_function(grid, self.function, local=True)

    def exact_solution(self, grid: Grid) -> ScalarField | None:
        return ScalarField.from_function(grid, self.function, local=True) if self.exact else None

    @property
    def label(self) -> str:
        if self.name == "ustar":
            return f"ustar-p{self.p:g}"
        return self.name

    def describe(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "label": self.label,
            "description": self.description,
            "p": self.p,
            "exact": self.exact,
            "parameters": self.parameters,
        }


SCENARIO_NAMES = ("affine", "ustar", "oscillatory")
SUITE_NAME = "standard"


def make_scenario(name: str, p: float, parameters: Mapping[str, Any] | None = None) -> Scenario:
    params = dict(parameters or {})
    if name == "affine":
        coefficients = tuple(float(c) for c in params.get("coefficients", AFFINE_DEFAULT))
        if len(coefficients) != 3:
            raise ConfigError("affine coefficients must be three numbers (a, b, c) for a*x1 + b*x2 + c")
        return Scenario(
            "affine",
            "affine data; exact discrete solution for every p and eps",
            p,
            affine_function(coefficients),
            exact=True,
            parameters={"coefficients": list(coefficients)},
        )
    if name == "ustar":
        return Scenario(
            "ustar",
            "|x1|^p' - |x2|^p', exact solution of the degenerate equation",
            p,
            ustar_function(p),
            exact=True,
            parameters={"conjugate_exponent": conjugate_exponent(p)},
        )
    if name == "oscillatory":
        frequency = float(params.get("frequency", 2.0 * math.pi))
        return Scenario(
            "oscillatory",
            "sin(k x1) + cos(k x2)/2 on the boundary; activates both axes and sign changes",
            p,
            oscillatory_function(frequency),
            parameters={"frequency": frequency},
        )
    raise ConfigError(f"unknown scenario {name!r}; expected one of {SCENARIO_NAMES + (SUITE_NAME,)}")


def expand_scenarios(name: str, p: float, parameters: Mapping[str, Any] | None = None) -> list[Scenario]:
    """Resolve a scenario name, expanding ``standard`` into the fixed suite."""
    if name != SUITE_NAME:
        return [make_scenario(name, p, parameters)]
    suite = [make_scenario("affine", p)]
    suite.extend(make_scenario("ustar", exponent) for exponent in STANDARD_USTAR_EXPONENTS)
    suite.append(make_scenario("oscillatory", p))
    return suite


def sweep_scenarios(name: str, p: float, parameters: Mapping[str, Any] | None = None) -> list[Scenario]:
    """Like :func:`expand_scenarios`, but every member uses the swept exponent."""
    if name != SUITE_NAME:
        return [make_scenario(name, p, parameters)]
    return [make_scenario(member, p) for member in SCENARIO_NAMES]


def catalogue() -> list[dict[str, Any]]:
    return [
        make_scenario("affine", 1.5).describe(),
        make_scenario("ustar", 1.5).describe(),
        make_scenario("oscillatory", 1.5).describe(),
        {
            "name": SUITE_NAME,
            "description": "affine, ustar at p in {1.2, 1.5, 1.8}, oscillatory",
            "members": [s.label for s in expand_scenarios(SUITE_NAME, 1.5)],
        },
    ]
