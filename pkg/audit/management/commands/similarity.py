# audit/management/commands/similarity.py
from pathlib import Path

from django.conf import settings

from audit.catalogs import load_lexicon, load_profile
from audit.exceptions import ConfigError, DomainError
from audit.management.base import AuditCommand
from audit.pipeline import run_similarity


def _other_catalog(config):
    return sorted(config['similarity']['catalogs'].items())[0]


class Command(AuditCommand):
    help = "Compare two OEM property catalogs by token-set Jaccard similarity."

    config_defaults = {
        'catalog_a': lambda config: config['catalog'],
        'label_a': lambda config: config['oem'],
        'label_b': lambda config: _other_catalog(config)[0],
        'catalog_b': lambda config: _other_catalog(config)[1],
        'threshold': lambda config: config['similarity']['threshold'],
        'lexicon': lambda config: config['lexicon'],
    }

    def add_phase_arguments(self, parser):
        parser.add_argument('--catalog-a', help="First property catalog JSON")
        parser.add_argument('--catalog-b', help="Second property catalog JSON")
        parser.add_argument('--label-a', help="Label of the first catalog (defaults to its file name)")
        parser.add_argument('--label-b', help="Label of the second catalog (defaults to its file name)")
        parser.add_argument('--threshold', type=float, help="Minimum Jaccard score, in (0, 1]")
        parser.add_argument('--lexicon', help="Category lexicon JSON")

    def run(self, **options):
        self.require(options, 'catalog_a', 'catalog_b', 'out')
        catalog_a = self.existing_file(options, 'catalog_a')
        catalog_b = self.existing_file(options, 'catalog_b')
        threshold = options.get('threshold')
        if threshold is None:
            threshold = settings.AUDITOR['THRESHOLD']
        if not 0 < threshold <= 1:
            raise ConfigError(f"must be in (0, 1], got {threshold}", field='--threshold')

        lexicon = load_lexicon(self.existing_file(options, 'lexicon'))
        profiles = [
            load_profile(catalog_a, options.get('label_a') or catalog_a.stem, lexicon),
            load_profile(catalog_b, options.get('label_b') or catalog_b.stem, lexicon),
        ]
        out = Path(options['out'])
        table = out if out.suffix.lower() == '.csv' else out / 'similarity.csv'
        table.parent.mkdir(parents=True, exist_ok=True)
        try:
            rows = run_similarity(profiles, threshold, table)
        except DomainError as exc:
            raise ConfigError(str(exc), field='--threshold')
        row = rows[0]
        return f"{row['set1']} vs {row['set2']}: {row['similar_count']} similar pairs -> {table}"
