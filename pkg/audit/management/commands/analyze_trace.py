# audit/management/commands/analyze_trace.py
from audit.catalogs import load_lexicon, load_profile
from audit.exceptions import ConfigError
from audit.management.base import AuditCommand
from audit.pipeline import run_dynamic


class Command(AuditCommand):
    help = "Count vendor property accesses in frida-trace logs."

    config_defaults = {
        'trace': lambda config: [item['trace'] for item in config['dynamic']['traces']],
        'package': lambda config: [item['package'] for item in config['dynamic']['traces']],
        'catalog': lambda config: config['catalog'],
        'lexicon': lambda config: config['lexicon'],
        'oem': lambda config: config['oem'],
        'window': lambda config: config['dynamic']['window'],
        'bucket': lambda config: config['dynamic']['bucket'],
    }

    def add_phase_arguments(self, parser):
        parser.add_argument('--trace', action='append', help="frida-trace log; repeat once per package")
        parser.add_argument('--package', action='append', help="Package traced by the matching --trace")
        parser.add_argument('--catalog', help="OEM property catalog JSON, for categories")
        parser.add_argument('--lexicon', help="Category lexicon JSON")
        parser.add_argument('--oem', help="OEM label (defaults to the catalog file name)")
        parser.add_argument('--window', type=float, help="Observation window in seconds")
        parser.add_argument('--bucket', type=float, help="Histogram bucket width in seconds")
        parser.add_argument('--workers', type=int, help="Traces parsed in parallel")

    def run(self, **options):
        self.require(options, 'trace', 'package')
        traces, packages = options['trace'], options['package']
        if len(traces) != len(packages):
            raise ConfigError(
                f"{len(traces)} traces but {len(packages)} packages; pass one --package per --trace",
                field='--package',
            )
        for name in ('window', 'bucket'):
            if options.get(name) is not None and options[name] <= 0:
                raise ConfigError("must be positive", field=f"--{name}")
        for trace in traces:
            self.existing_file({'trace': trace}, 'trace')
        out = self.out_dir(options)

        profile = None
        catalog = self.existing_file(options, 'catalog')
        if catalog:
            lexicon = load_lexicon(self.existing_file(options, 'lexicon'))
            profile = load_profile(catalog, self.oem_label(options, catalog), lexicon)
        outcome = run_dynamic(
            list(zip(traces, packages)), profile, out,
            window=options.get('window'), bucket=options.get('bucket'), workers=options.get('workers'),
        )
        section = outcome.section
        return f"{section['total']} property accesses in {section['window_seconds']:g} s -> {out}"
