#!/usr/bin/env python3
"""
popmatch runner
---------------
Runs the popmatch command line from a source checkout. Environment variables
are read from a .env file next to this script when present.
"""

import os
import sys

from dotenv import load_dotenv


def load_environment():
    """Load POPMATCH_* variables from the .env file beside this script"""
    env_path = os.path.join(os.path.dirname(os.path.abspath(__file__)), ".env")
    load_dotenv(env_path)


def main():
    """Put the project root on the path and hand over to the CLI"""
    project_root = os.path.dirname(os.path.abspath(__file__))
    sys.path.insert(0, project_root)
    load_environment()

    from popmatch.cli import main as cli_main

    return cli_main()


if __name__ == "__main__":
    sys.exit(main())
