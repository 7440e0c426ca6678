"""Orthotropic p-Laplace MCP Server Package."""

__version__ = "0.1.0"
