"""Orthotropic p-Laplace MCP Server - solver runs and estimate checks over stdio.

Tools map one-to-one onto the CLI commands. Each reply carries the JSON
payload first and a one-line summary second; solves run off the event loop.
"""

import asyncio
import json
import logging
import time
from typing import Any

import mcp.server.stdio
from mcp.server import Server
from mcp.types import GetPromptResult, Prompt, PromptMessage, Resource, TextContent, Tool

from orthotropic_shared.tools import (
    call_tool_data,
    get_prompt_data,
    list_prompts_data,
    list_resources_data,
    list_tools_data,
    read_resource_data,
    summarize_result,
)

logger = logging.getLogger(__name__)

app = Server("orthotropic-p-laplace-mcp-server")


@app.list_resources()
async def list_resources() -> list[Resource]:
    """List the scenario catalogue and the default run config."""
    return [Resource(**resource) for resource in list_resources_data()]


@app.read_resource()
async def read_resource(uri: str) -> str:
    """Read a scenario or defaults resource as JSON."""
    payload = read_resource_data(uri)
    if isinstance(payload, str):
        return payload
    return json.dumps(payload, indent=2)


@app.list_tools()
async def list_tools() -> list[Tool]:
    """List the solve, verify, sweep and monotonicity tools."""
    return [Tool(**tool) for tool in list_tools_data()]


@app.call_tool()
async def call_tool(name: str, arguments: Any) -> list[TextContent]:
    """Run a tool in a worker thread and return its payload and summary."""
    started = time.perf_counter()
    result = await asyncio.to_thread(call_tool_data, name, arguments)
    summary = summarize_result(name, result)
    level = logging.INFO if result.get("exit_code", 0) == 0 else logging.WARNING
    logger.log(level, "%s in %.2fs", summary, time.perf_counter() - started)
    return [
        TextContent(type="text", text=json.dumps(result, indent=2)),
        TextContent(type="text", text=summary),
    ]


@app.list_prompts()
async def list_prompts() -> list[Prompt]:
    """List the verification prompts."""
    return [Prompt(**prompt) for prompt in list_prompts_data()]


@app.get_prompt()
async def get_prompt(name: str, arguments: dict[str, str] | None) -> GetPromptResult:
    """Render a verification prompt."""
    prompt_payload = get_prompt_data(name, arguments)
    messages = []
    for message in prompt_payload.get("messages", []):
        content = message.get("content", {})
        messages.append(
            PromptMessage(
                role=message.get("role", "user"),
                content=TextContent(type="text", text=content.get("text", "")),
            )
        )
    return GetPromptResult(description=prompt_payload["description"], messages=messages)


async def main():
    """Serve the orthotropic tools over stdio."""
    logger.info("starting %s", app.name)
    async with mcp.server.stdio.stdio_server() as (read_stream, write_stream):
        await app.run(
            read_stream,
            write_stream,
            app.create_initialization_options(),
        )


if __name__ == "__main__":
    asyncio.run(main())
