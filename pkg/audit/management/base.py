# audit/management/base.py
"""Shared plumbing for the auditor subcommands."""
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from audit.exceptions import AuditError, ConfigError
from audit.logconfig import configure_logging
from audit.pipeline import load_run_config


class AuditCommand(BaseCommand):
    """Adds the global flags and turns AuditError into CommandError(returncode)."""

    requires_system_checks = []
    requires_migrations_checks = False

    # option name -> callable(run config) -> value, used when the flag is absent
    config_defaults = {}

    def add_arguments(self, parser):
        parser.add_argument('--out', help="Output directory")
        parser.add_argument('--config', help="Run config JSON; flags override its values")
        parser.add_argument('--quiet', action='store_true', help="Only log warnings and errors")
        parser.add_argument('--json-logs', action='store_true', help="Log one JSON object per line")
        self.add_phase_arguments(parser)

    def add_phase_arguments(self, parser):
        pass

    def handle(self, *args, **options):
        configure_logging(quiet=options['quiet'], json_logs=options['json_logs'])
        try:
            if options.get('config'):
                self.apply_config(options)
            message = self.run(**options)
        except AuditError as exc:
            raise CommandError(str(exc), returncode=exc.exit_status)
        if message and not options['quiet']:
            self.stdout.write(self.style.SUCCESS(message))

    def run(self, **options):
        raise NotImplementedError

    # ---------- options ----------

    def apply_config(self, options):
        config = load_run_config(options['config'], out=options.get('out'))
        for name, pick in self.config_defaults.items():
            if options.get(name) in (None, [], ()):
                try:
                    options[name] = pick(config)
                except (KeyError, IndexError, TypeError):
                    continue
        if not options.get('out'):
            options['out'] = config['out']

    def require(self, options, *names):
        for name in names:
            if options.get(name) in (None, [], ()):
                raise ConfigError("is required", field=f"--{name.replace('_', '-')}")

    def existing_file(self, options, name):
        value = options.get(name)
        if value is None:
            return None
        path = Path(value)
        if not path.is_file():
            raise ConfigError(f"file does not exist: {path}", field=f"--{name.replace('_', '-')}")
        return path

    def existing_dir(self, options, name):
        value = options.get(name)
        if value is None:
            return None
        path = Path(value)
        if not path.is_dir():
            raise ConfigError(f"directory does not exist: {path}", field=f"--{name.replace('_', '-')}")
        return path

    def out_dir(self, options):
        self.require(options, 'out')
        path = Path(options['out'])
        path.mkdir(parents=True, exist_ok=True)
        return path

    def oem_label(self, options, catalog=None):
        if options.get('oem'):
            return options['oem']
        return Path(catalog).stem if catalog else 'unlabelled'
