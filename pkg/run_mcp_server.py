#!/usr/bin/env python3
"""Entry point for the orthotropic p-Laplace MCP Server (stdio transport)."""

import argparse
import asyncio
import logging

from orthotropic_mcp.server import main


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Orthotropic p-Laplace MCP Server")
    parser.add_argument(
        "--log-level",
        default="info",
        choices=["debug", "info", "warning", "error"],
        help="Log level (default: info). Logs go to stderr; stdout carries the protocol.",
    )
    return parser.parse_args()


if __name__ == "__main__":
    args = parse_args()
    logging.basicConfig(level=args.log_level.upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    asyncio.run(main())
