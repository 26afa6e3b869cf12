#!/usr/bin/env python
"""Django administrative tasks (migrate, runserver, test) for vhalaudit.

Hyphenated auditor subcommands (`manage.py scan-static ...`) are handed to
the `auditor` CLI so they keep its exit statuses.
"""
import os
import sys


def main():
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'vhalaudit.settings')
    args = sys.argv[1:]
    if args and '-' in args[0] and not args[0].startswith('-'):
        from vhalaudit.cli import SUBCOMMANDS, main as auditor
        if args[0] in SUBCOMMANDS:
            sys.exit(auditor(args))
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError("Django is not installed; run `pip install -r requirements.txt` first.") from exc
    execute_from_command_line(sys.argv)


if __name__ == '__main__':
    main()
