#!/usr/bin/env python3
"""Entry point for the orthotropic p-Laplace command-line runner."""

import sys

from orthotropic_cli.main import main

if __name__ == "__main__":
    sys.exit(main())
