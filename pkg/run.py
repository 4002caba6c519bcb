#!/usr/bin/env python
"""Entry point for the ontrack command line."""
from ontrack.cli.main import run


if __name__ == "__main__":
    run()
