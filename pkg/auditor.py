#!/usr/bin/env python
"""The `auditor` command-line entry point (see vhalaudit/cli.py)."""
import sys

from vhalaudit.cli import main


if __name__ == '__main__':
    sys.exit(main())
