# audit/management/commands/parse_policy.py
from audit.exceptions import ConfigError
from audit.management.base import AuditCommand
from audit.pipeline import run_policy

KINDS = {'.html': 'html', '.htm': 'html', '.txt': 'text', '.md': 'text'}


class Command(AuditCommand):
    help = "Segment privacy policies and extract data-flow statements."

    config_defaults = {
        'inputs': lambda config: [item['path'] for item in config['policy']['documents']],
        'kind': lambda config: [item['kind'] for item in config['policy']['documents']],
        'extractor': lambda config: config['policy']['extractor'],
        'endpoint': lambda config: config['policy']['endpoint'],
        'chunk_sentences': lambda config: config['policy']['chunk_sentences'],
    }

    def add_phase_arguments(self, parser):
        parser.add_argument('--in', dest='inputs', action='append', help="Policy document; repeatable")
        parser.add_argument(
            '--kind', action='append', choices=['html', 'text'],
            help="Document kind, once per --in (default: from the file extension)",
        )
        parser.add_argument('--extractor', choices=['rule', 'remote'], help="Flow extractor")
        parser.add_argument('--endpoint', help="Remote extractor URL")
        parser.add_argument('--chunk-sentences', type=int, help="Sentences per extraction chunk")

    def documents(self, options):
        inputs = options.get('inputs') or []
        if not inputs:
            raise ConfigError("is required", field='--in')
        kinds = options.get('kind') or []
        if kinds and len(kinds) not in (1, len(inputs)):
            raise ConfigError("pass one --kind, or one per --in", field='--kind')
        documents = []
        for index, value in enumerate(inputs):
            path = self.existing_file({'in': value}, 'in')
            if kinds:
                kind = kinds[index] if len(kinds) > 1 else kinds[0]
            else:
                kind = KINDS.get(path.suffix.lower(), 'text')
            documents.append((path, kind))
        return documents

    def run(self, **options):
        documents = self.documents(options)
        if options.get('chunk_sentences') is not None and options['chunk_sentences'] < 1:
            raise ConfigError("must be at least 1", field='--chunk-sentences')
        out = self.out_dir(options)
        outcome = run_policy(
            documents, out, options.get('extractor'), options.get('endpoint'), options.get('chunk_sentences'),
        )
        section = outcome.section
        return (
            f"{section['flows']} flows ({section['disclosing_flows']} disclosing), "
            f"{section['purposes']} distinct purposes -> {out}"
        )
