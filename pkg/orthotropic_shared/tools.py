"""Tool and resource catalogue served by the MCP front-end."""

from __future__ import annotations

import logging
from typing import Any

from orthotropic_shared.config import DEFAULT_TOLERANCES, RunConfig, load_config
from orthotropic_shared.errors import ConfigError, MonotonicityViolation, OrthotropicError
from orthotropic_shared.runs import EXIT_CONFIG, EXIT_FAILURE, cmd_solve, cmd_sweep, cmd_verify
from orthotropic_shared.scenarios import SCENARIO_NAMES, SUITE_NAME, catalogue
from orthotropic_shared.verify import MONOTONICITY_TOLERANCE, sweep_monotonicity_inequality

logger = logging.getLogger(__name__)

READ_ONLY = {"readOnlyHint": True, "openWorldHint": False}
# Runs rewrite their own snapshots and reports under ``out``; reruns reproduce them.
WRITES_RUNS = {"readOnlyHint": False, "destructiveHint": True, "idempotentHint": True, "openWorldHint": False}

CHECK_NOTES: dict[str, str] = {
    "minimality": "The solved field must not lose to any seeded random competitor in energy.",
    "exact-error": "Sup distance to the closed-form solution, bounded by a fraction of its sup norm.",
    "exact-trend": (
        "Exact errors along the eps ladder may not grow until they sit within twice the final "
        "level's error, which is taken as the mesh floor."
    ),
    "exact-refinement": (
        "The exact error must shrink under grid refinement. It is only recorded while the last "
        "eps step still cut the error by more than 10%."
    ),
    "lebesgue": (
        "Squared oscillation of a derivative on B_r times log(R/r) against pi times its Dirichlet "
        "energy on the annulus B_R minus B_r, for 4h <= r < R/2."
    ),
    "maxmin": "Interior extrema of a derivative may pass its extrema on each ring by at most h times its slope.",
    "theorem": "Measured modulus-of-continuity constant of the derivatives; must agree across references.",
    "lipschitz": "sup of eps + |grad u|^2 on B_(R/2) against the averaged energy on B_R.",
    "caccioppoli": "Cutoff-weighted second derivatives with weight w^((p-2)/2) against the cutoff energy term.",
    "weight-gradient": "Gradient of the rescaled weight against the same energy term.",
    "grad-l2": "Second derivatives in L^2(B_(R/2)) against the averaged energy of the extension on B_R.",
    "energy-estimate": "Gradient L^p energy of the solution on B_R against the extension's plus eps^(p/2) R^2.",
    "derivative-equation": "Normalized residual of the linearized equation each derivative solves.",
    "convergence": "Consecutive eps-ladder differences must eventually decrease.",
    "monotonicity": "Largest ratio of the scalar monotonicity inequality, stable under sample refinement.",
}

TOLERANCE_KEYS: dict[str, str] = {
    "minimality": "minimality",
    "exact-error": "exact",
    "exact-trend": "convergence",
    "lebesgue": "lebesgue",
    "maxmin": "maxmin",
    "theorem": "stability",
    "lipschitz": "stability",
    "caccioppoli": "stability",
    "weight-gradient": "stability",
    "grad-l2": "stability",
    "convergence": "convergence",
    "monotonicity": "monotonicity",
}

CONFIG_PROPERTIES: dict[str, Any] = {
    "config": {"type": "string", "description": "Path to a JSON run config; other arguments override its keys"},
    "scenario": {
        "type": "string",
        "enum": [*SCENARIO_NAMES, SUITE_NAME],
        "description": "Boundary-data scenario, or 'standard' for the full suite",
    },
    "p": {"type": "number", "description": "Exponent, strictly between 1 and 2"},
    "eps0": {"type": "number", "description": "Largest regularization of the eps ladder"},
    "levels": {"type": "integer", "description": "Number of ladder levels (eps0 * 4^-k)"},
    "n": {
        "type": "array",
        "items": {"type": "integer"},
        "description": "Odd grid sizes (nodes per side)",
    },
    "side": {"type": "number", "description": "Side length of the square domain"},
    "R": {"type": "number", "description": "Radius of the estimate ball B_R"},
    "out": {"type": "string", "description": "Output directory"},
    "seed": {"type": "integer", "description": "Seed for competitors and test functions"},
    "tolerances": {"type": "object", "description": "Per-check tolerance overrides"},
    "sweep": {"type": "object", "description": "Sweep grid {'p': [...], 'eps': [...], 'n': [...]}"},
}


def list_resources_data() -> list[dict[str, Any]]:
    return [
        {
            "uri": "orthotropic://scenarios",
            "name": "Scenarios",
            "mimeType": "application/json",
            "description": "Boundary-data scenarios and the standard suite",
        },
        {
            "uri": "orthotropic://defaults",
            "name": "Default Run Config",
            "mimeType": "application/json",
            "description": "Default run configuration and check tolerances",
        },
    ]


def read_resource_data(uri: str) -> Any:
    uri_str = str(uri)
    if uri_str == "orthotropic://scenarios":
        return {"scenarios": catalogue()}
    if uri_str == "orthotropic://defaults":
        return {"config": RunConfig().to_dict(), "tolerances": DEFAULT_TOLERANCES}
    raise ValueError(f"Unknown resource URI: {uri_str}")


def list_tools_data() -> list[dict[str, Any]]:
    return [
        {
            "name": "list_scenarios",
            "description": "List the available boundary-data scenarios",
            "inputSchema": {"type": "object", "properties": {}},
            "annotations": {"title": "List scenarios", **READ_ONLY},
        },
        {
            "name": "solve",
            "description": "Solve the regularized problem along the eps ladder and write field snapshots",
            "inputSchema": {"type": "object", "properties": CONFIG_PROPERTIES},
            "annotations": {"title": "Solve eps ladder", **WRITES_RUNS},
        },
        {
            "name": "verify",
            "description": "Run the estimate checks (solving first unless solve_first is false)",
            "inputSchema": {
                "type": "object",
                "properties": {
                    **CONFIG_PROPERTIES,
                    "solve_first": {"type": "boolean", "description": "Solve before checking (default true)"},
                },
            },
            "annotations": {"title": "Verify estimates", **WRITES_RUNS},
        },
        {
            "name": "sweep",
            "description": "Tabulate measured constants over p x eps x n into sweep.csv",
            "inputSchema": {"type": "object", "properties": CONFIG_PROPERTIES},
            "annotations": {"title": "Sweep constants", **WRITES_RUNS},
        },
        {
            "name": "monotonicity_sweep",
            "description": "Measure the scalar flux monotonicity constant on a sampled square",
            "inputSchema": {
                "type": "object",
                "properties": {
                    "p": {"type": "number", "description": "Exponent, strictly between 1 and 2"},
                    "eps": {
                        "type": "array",
                        "items": {"type": "number"},
                        "description": "Regularization values (0 allowed)",
                    },
                    "samples": {"type": "integer", "description": "Samples per axis (default 401)"},
                    "bound": {"type": "number", "description": "Half-width of the sampled square (default 10)"},
                },
                "required": ["p"],
            },
            "annotations": {"title": "Flux monotonicity sweep", "idempotentHint": True, **READ_ONLY},
        },
    ]


def _run_command(command: Any, args: dict[str, Any]) -> dict[str, Any]:
    overrides = dict(args)
    path = overrides.pop("config", None)
    try:
        config = load_config(path, overrides)
    except ConfigError as exc:
        return {"status": "error", "exit_code": EXIT_CONFIG, "message": str(exc)}
    return command(config).to_dict()


def call_tool_data(name: str, arguments: dict[str, Any] | None) -> dict[str, Any]:
    """Execute a tool and return its payload."""
    args = arguments or {}
    logger.info("tool call %s", name)

    if name == "list_scenarios":
        return {"status": "success", "scenarios": catalogue()}

    if name == "solve":
        return _run_command(cmd_solve, args)

    if name == "verify":
        return _run_command(cmd_verify, args)

    if name == "sweep":
        return _run_command(cmd_sweep, args)

    if name == "monotonicity_sweep":
        try:
            report = sweep_monotonicity_inequality(
                float(args["p"]),
                [float(e) for e in args.get("eps", (0.0, 0.1, 1.0))],
                int(args.get("samples", 401)),
                bound=float(args.get("bound", 10.0)),
                tolerance=MONOTONICITY_TOLERANCE,
            )
        except KeyError:
            return {"status": "error", "exit_code": EXIT_CONFIG, "message": "p is required"}
        except MonotonicityViolation as exc:
            return {"status": "failed", "exit_code": EXIT_FAILURE, "message": str(exc)}
        except OrthotropicError as exc:
            return {"status": "error", "exit_code": EXIT_CONFIG, "message": str(exc)}
        return {
            "status": "success" if report.passed else "failed",
            "exit_code": 0 if report.passed else EXIT_FAILURE,
            "report": report.to_dict(),
        }

    raise ValueError(f"Unknown tool: {name}")


def summarize_result(name: str, result: dict[str, Any]) -> str:
    """One line for a tool reply: status, exit code and the headline."""
    status = result.get("status", "success")
    code = result.get("exit_code", 0)
    if name == "list_scenarios":
        headline = ", ".join(entry["name"] for entry in result.get("scenarios", []))
    elif name == "monotonicity_sweep" and "report" in result:
        report = result["report"]
        headline = f"largest ratio {report['lhs']:.6g} (refinement ratio {report['ratio']:.4f})"
    else:
        headline = result.get("message", "")
    return f"{name}: {status} (exit {code}) {headline}".rstrip()


def list_prompts_data() -> list[dict[str, Any]]:
    return [
        {
            "name": "verify_scenario",
            "description": "Plan and read a verification run for one scenario",
            "arguments": [
                {
                    "name": "scenario",
                    "description": f"One of {', '.join((*SCENARIO_NAMES, SUITE_NAME))}",
                    "required": True,
                }
            ],
        },
        {
            "name": "explain_check",
            "description": "Explain what a named check measures and how it passes",
            "arguments": [
                {
                    "name": "check",
                    "description": f"One of {', '.join(CHECK_NOTES)}",
                    "required": True,
                }
            ],
        },
    ]


def _prompt(description: str, text: str) -> dict[str, Any]:
    return {
        "description": description,
        "messages": [{"role": "user", "content": {"type": "text", "text": text.strip()}}],
    }


def get_prompt_data(name: str, arguments: dict[str, str] | None) -> dict[str, Any]:
    args = arguments or {}
    if name == "verify_scenario":
        scenario = args.get("scenario", SUITE_NAME)
        if scenario not in (*SCENARIO_NAMES, SUITE_NAME):
            raise ValueError(f"Unknown scenario: {scenario}")
        config = RunConfig()
        text = f"""
## Verify the {scenario} scenario

Defaults: p = {config.p:g}, n = {list(config.n)}, eps0 = {config.eps0:g}, {config.levels} ladder levels, R = {config.R:g}.

1. Call `verify` with scenario="{scenario}". It solves the eps ladder first.
2. Exit code 0 means every check passed and every negative control failed;
   2 means a check failed or the solver stalled; 1 means bad input.
3. For each entry of "scenarios", read the reports named in its "failed" list.
   Bound reports pass when lhs <= rhs * (1 + tolerance). Stability reports
   compare each reference's measurement with the primary one; their context
   lists the members. Measurement reports only record a value.
4. Use `explain_check` on any failed report before drawing conclusions.
"""
        return _prompt(f"Verification plan for {scenario}", text)

    if name == "explain_check":
        check = args.get("check", "")
        base = check.removesuffix("-j1").removesuffix("-j2")
        if base not in CHECK_NOTES:
            raise ValueError(f"Unknown check: {check}")
        key = TOLERANCE_KEYS.get(base)
        limit = "" if key is None else f"\n\nDefault tolerance ('{key}'): {DEFAULT_TOLERANCES[key]:g}."
        return _prompt(f"What the {check} check measures", f"## {check}\n\n{CHECK_NOTES[base]}{limit}")

    raise ValueError(f"Unknown prompt: {name}")
