"""Estimate reports shared by the solver, the checks and the run layer."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Literal, Sequence

ReportKind = Literal["bound", "stability", "measurement"]

SUMMARY_COLUMNS = ("name", "kind", "lhs", "rhs", "ratio", "tolerance", "passed")


def safe_ratio(lhs: float, rhs: float) -> float:
    """``lhs / rhs`` with ``0/0 = 0`` and ``x/0 = inf`` for ``x > 0``."""
    if rhs > 0.0:
        return lhs / rhs
    return 0.0 if lhs <= 0.0 else math.inf


@dataclass(frozen=True)
class EstimateReport:
    """One measured inequality.

    ``bound`` reports pass iff ``lhs <= rhs * (1 + tolerance)``. ``stability``
    reports carry the measured constant farthest from the primary one as
    ``lhs`` and the primary constant as ``rhs``; they pass iff
    ``|lhs - rhs| <= tolerance * rhs`` (or when every member sits below a
    round-off floor). ``measurement`` reports only record a ratio and pass
    when it is finite.
    """

    name: str
    lhs: float
    rhs: float
    tolerance: float
    passed: bool
    kind: ReportKind = "bound"
    context: dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def ratio(self) -> float:
        return safe_ratio(self.lhs, self.rhs)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "kind": self.kind,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "ratio": self.ratio,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "context": self.context,
        }

    def summary_row(self) -> list[Any]:
        return [self.name, self.kind, self.lhs, self.rhs, self.ratio, self.tolerance, self.passed]


def bound_report(
    name: str, lhs: float, rhs: float, tolerance: float, **context: Any
) -> EstimateReport:
    passed = bool(lhs <= rhs * (1.0 + tolerance))
    return EstimateReport(name, float(lhs), float(rhs), tolerance, passed, "bound", context)


def measurement_report(name: str, lhs: float, rhs: float, **context: Any) -> EstimateReport:
    ratio = safe_ratio(lhs, rhs)
    return EstimateReport(
        name, float(lhs), float(rhs), math.inf, bool(math.isfinite(ratio)), "measurement", context
    )


def stability_report(
    name: str,
    measurements: Sequence[EstimateReport],
    tolerance: float,
    *,
    floor: float = 0.0,
    **context: Any,
) -> EstimateReport:
    """Compare measured constants with the first one, the primary measurement.

    Passes iff every other constant lies within ``±tolerance`` of the primary
    constant. ``lhs`` is the member farthest from the primary and ``rhs`` the
    primary itself. Constants that all sit at or below ``floor`` are round-off
    and pass.
    """
    if len(measurements) < 2:
        raise ValueError("stability needs at least two measurements")
    ratios = [m.ratio for m in measurements]
    primary = ratios[0]
    farthest = max(ratios[1:], key=lambda ratio: abs(ratio - primary))
    finite = all(math.isfinite(ratio) for ratio in ratios)
    within = all(abs(ratio - primary) <= tolerance * primary for ratio in ratios[1:])
    passed = bool(finite and (within or max(ratios) <= floor))
    spread = safe_ratio(max(ratios), min(ratios))
    context = {
        **context,
        "floor": floor,
        "ratios": ratios,
        "spread": spread,
        "members": [m.context for m in measurements],
    }
    return EstimateReport(name, farthest, primary, tolerance, passed, "stability", context)


def sorted_reports(reports: Iterable[EstimateReport]) -> list[EstimateReport]:
    return sorted(reports, key=lambda report: report.name)
