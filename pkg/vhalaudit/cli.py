# vhalaudit/cli.py
"""`auditor` entry point: one subcommand per analysis phase plus full-run."""
import logging
import os
import sys

from audit.exceptions import EXIT_ANALYSIS, EXIT_OK, EXIT_USAGE
from vhalaudit import __version__

SUBCOMMANDS = (
    'scan-static',
    'similarity',
    'analyze-trace',
    'analyze-net',
    'parse-policy',
    'check-consistency',
    'full-run',
)

logger = logging.getLogger('audit')


def usage():
    lines = [f"usage: auditor <subcommand> [options]   (version {__version__})", '', 'subcommands:']
    lines += [f"  {name}" for name in SUBCOMMANDS]
    lines += ['', "Run `auditor <subcommand> --help` for the options of one subcommand."]
    return '\n'.join(lines) + '\n'


def main(argv=None, stdout=None, stderr=None):
    """Run one subcommand and return its exit status (0 ok, 1 usage, 2 analysis)."""
    argv = list(sys.argv[1:] if argv is None else argv)
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr

    if not argv or argv[0] in ('-h', '--help'):
        (stdout if argv else stderr).write(usage())
        return EXIT_OK if argv else EXIT_USAGE
    if argv[0] == '--version':
        stdout.write(f"{__version__}\n")
        return EXIT_OK
    name, rest = argv[0], argv[1:]
    if name not in SUBCOMMANDS:
        stderr.write(f"auditor: unknown subcommand {name!r}\n\n{usage()}")
        return EXIT_USAGE

    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'vhalaudit.settings')
    import django
    from django.core.management import load_command_class
    from django.core.management.base import CommandError

    django.setup()
    command = load_command_class('audit', name.replace('-', '_'))
    parser = command.create_parser('auditor', name)
    try:
        options = parser.parse_args(rest)
    except CommandError as exc:
        stderr.write(f"auditor {name}: {exc}\n")
        return exc.returncode
    except SystemExit as exc:
        # --help exits from argparse itself
        return exc.code or EXIT_OK

    cmd_options = vars(options)
    args = cmd_options.pop('args', ())
    cmd_options.update(stdout=stdout, stderr=stderr)
    try:
        command.execute(*args, **cmd_options)
    except CommandError as exc:
        stderr.write(f"auditor {name}: {exc}\n")
        return exc.returncode
    except Exception:
        logger.exception("auditor %s failed", name)
        return EXIT_ANALYSIS
    return EXIT_OK
