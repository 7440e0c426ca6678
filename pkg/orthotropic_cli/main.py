"""Argument parsing and dispatch for the ``solve``, ``verify`` and ``sweep`` commands."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Sequence

from orthotropic_shared.config import load_config
from orthotropic_shared.errors import ConfigError
from orthotropic_shared.runs import EXIT_CONFIG, RunOutcome, cmd_solve, cmd_sweep, cmd_verify

logger = logging.getLogger(__name__)

COMMANDS = {"solve": cmd_solve, "verify": cmd_verify, "sweep": cmd_sweep}
HELP = {
    "solve": "Solve every scenario along the eps ladder and write field snapshots",
    "verify": "Run the estimate checks and write reports.json / summary.csv",
    "sweep": "Tabulate measured constants over p x eps x n into sweep.csv",
}


def _int_list(raw: str) -> list[int]:
    try:
        return [int(item) for item in raw.split(",") if item.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {raw!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orthotropic",
        description="Orthotropic p-Laplace solver and estimate verification harness",
    )
    parser.add_argument(
        "--log-level",
        default="info",
        choices=["debug", "info", "warning", "error"],
        help="Log level (default: info).",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, help_text in HELP.items():
        sub = subparsers.add_parser(name, help=help_text, description=help_text)
        sub.add_argument("--config", help="JSON run config; flags below override its keys")
        sub.add_argument(
            "--set",
            dest="settings",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="Override one config key (VALUE is parsed as JSON when possible).",
        )
        sub.add_argument("--scenario", help="Scenario name or 'standard'")
        sub.add_argument("--p", type=float, help="Exponent in (1, 2)")
        sub.add_argument("--n", type=_int_list, help="Comma-separated odd grid sizes, e.g. 65,129")
        sub.add_argument("--eps0", type=float, help="Largest regularization of the ladder")
        sub.add_argument("--levels", type=int, help="Number of ladder levels")
        sub.add_argument("--out", help="Output directory")
        sub.add_argument("--seed", type=int, help="Seed for competitors and test functions")
    return parser


def _report(outcome: RunOutcome) -> None:
    stream = sys.stdout if outcome.exit_code == 0 else sys.stderr
    print(f"[{outcome.status}] {outcome.message}", file=stream)
    if outcome.artifacts:
        print(f"{len(outcome.artifacts)} artifact(s) written", file=stream)
    for scenario in outcome.payload.get("scenarios", []):
        print(json.dumps({"scenario": scenario["scenario"], "failed": scenario["failed"]}), file=stream)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    overrides = {
        "scenario": args.scenario,
        "p": args.p,
        "n": args.n,
        "eps0": args.eps0,
        "levels": args.levels,
        "out": args.out,
        "seed": args.seed,
    }
    try:
        config = load_config(args.config, overrides, args.settings)
    except ConfigError as exc:
        print(f"[error] {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logger.info("running %s on scenario %s", args.command, config.scenario)
    outcome = COMMANDS[args.command](config)
    _report(outcome)
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
