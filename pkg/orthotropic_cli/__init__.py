"""Command-line front-end: ``solve``, ``verify`` and ``sweep``."""
