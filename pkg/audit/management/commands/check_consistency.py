# audit/management/commands/check_consistency.py
from audit.management.base import AuditCommand
from audit.pipeline import check_consistency


class Command(AuditCommand):
    help = "Match collected properties against policy flows and write the report."

    config_defaults = {
        'taxonomy': lambda config: config['taxonomy'],
        'lexicon': lambda config: config['lexicon'],
        'catalog': lambda config: config['catalog'],
        'oem': lambda config: config['oem'],
    }

    def add_phase_arguments(self, parser):
        parser.add_argument('--flows', help="flows.json from parse-policy")
        parser.add_argument('--static', help="Output directory of scan-static")
        parser.add_argument('--dynamic', help="Output directory of analyze-trace")
        parser.add_argument('--network', help="Output directory of analyze-net")
        parser.add_argument('--taxonomy', help="Data-type taxonomy JSON")
        parser.add_argument('--lexicon', help="Category lexicon JSON")
        parser.add_argument('--catalog', help="OEM property catalog JSON")
        parser.add_argument('--oem', help="OEM label; must agree with the phase outputs")

    def run(self, **options):
        self.require(options, 'flows')
        out = self.out_dir(options)
        report = check_consistency(
            out,
            self.existing_file(options, 'flows'),
            static_dir=self.existing_dir(options, 'static'),
            dynamic_dir=self.existing_dir(options, 'dynamic'),
            network_dir=self.existing_dir(options, 'network'),
            taxonomy_path=self.existing_file(options, 'taxonomy'),
            lexicon_path=self.existing_file(options, 'lexicon'),
            catalog_path=self.existing_file(options, 'catalog'),
            oem=options.get('oem'),
        )
        return f"consistency report -> {report}"
