"""Shared numerical core for the orthotropic p-Laplace solver and harness."""

__version__ = "0.1.0"
