# audit/management/commands/scan_static.py
from audit.catalogs import load_lexicon, load_profile
from audit.management.base import AuditCommand
from audit.pipeline import run_static


class Command(AuditCommand):
    help = "Scan decompiled APK sources for vendor VHAL properties and permissions."

    config_defaults = {
        'root': lambda config: config['static']['root'],
        'catalog': lambda config: config['catalog'],
        'permissions': lambda config: config['permissions'],
        'lexicon': lambda config: config['lexicon'],
        'oem': lambda config: config['oem'],
    }

    def add_phase_arguments(self, parser):
        parser.add_argument('--root', help="Directory holding one decompiled source tree per package")
        parser.add_argument('--catalog', help="OEM property catalog JSON")
        parser.add_argument('--permissions', help="OEM permission catalog JSON")
        parser.add_argument('--lexicon', help="Category lexicon JSON")
        parser.add_argument('--oem', help="OEM label (defaults to the catalog file name)")
        parser.add_argument('--workers', type=int, help="Packages scanned in parallel")

    def run(self, **options):
        self.require(options, 'root', 'catalog')
        root = self.existing_dir(options, 'root')
        catalog = self.existing_file(options, 'catalog')
        out = self.out_dir(options)
        lexicon = load_lexicon(self.existing_file(options, 'lexicon'))
        profile = load_profile(
            catalog, self.oem_label(options, catalog), lexicon, self.existing_file(options, 'permissions'),
        )
        outcome = run_static(root, profile, lexicon, out, options.get('workers'))
        return (
            f"{outcome.section['packages']} packages scanned, "
            f"{outcome.section['referenced']['total']} distinct properties referenced -> {out}"
        )
