# audit/management/commands/full_run.py
from django.conf import settings
from django.core.management.base import CommandError

from audit.exceptions import EXIT_OK, EXIT_USAGE, AuditError
from audit.logconfig import configure_logging
from audit.management.base import AuditCommand
from audit.pipeline import full_run, load_run_config, record_run
from audit.reporting import RunClock


class Command(AuditCommand):
    help = "Run every configured phase and write report.json, report.md and run_meta.json."

    def add_phase_arguments(self, parser):
        parser.add_argument('--oem', help="Override the config's OEM label")
        parser.add_argument('--threshold', type=float, help="Override the similarity threshold")
        parser.add_argument('--window', type=float, help="Override the trace window in seconds")
        parser.add_argument('--bucket', type=float, help="Override the histogram bucket in seconds")
        parser.add_argument('--extractor', choices=['rule', 'remote'], help="Override the flow extractor")
        parser.add_argument('--endpoint', help="Override the remote extractor URL")
        parser.add_argument('--record', action='store_true', help="Store the run in the history database")

    def handle(self, *args, **options):
        configure_logging(quiet=options['quiet'], json_logs=options['json_logs'])
        clock = RunClock()
        config = None
        try:
            self.require(options, 'config')
            config = load_run_config(
                options['config'],
                out=options.get('out'),
                oem=options.get('oem'),
                threshold=options.get('threshold'),
                window=options.get('window'),
                bucket=options.get('bucket'),
                extractor=options.get('extractor'),
                endpoint=options.get('endpoint'),
            )
            outcome = full_run(config, clock)
        except AuditError as exc:
            if config is not None:
                status = 'usage_error' if exc.exit_status == EXIT_USAGE else 'analysis_error'
                self.finish(options, clock, config, [], status, exc.exit_status)
            raise CommandError(str(exc), returncode=exc.exit_status)
        self.finish(options, clock, config, outcome.phases, 'ok', EXIT_OK)
        if not options['quiet']:
            self.stdout.write(self.style.SUCCESS(
                f"{outcome.oem}: {', '.join(outcome.phases)} -> {outcome.report_path}"
            ))

    def finish(self, options, clock, config, phases, status, exit_code):
        out_dir = config['out']
        finished = clock.write(out_dir, phases, status)
        if options['record'] or settings.AUDITOR['RECORD_RUNS']:
            record_run(config['oem'], status, exit_code, phases, out_dir, clock.started_at, finished)
