# audit/pipeline.py
"""Phase runners.

Each runner writes its phase outputs under ``out_dir`` and returns the section
that goes into report.json, so a standalone subcommand and full-run produce
the same files.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path

from django.conf import settings
from django.db import DatabaseError

from . import netflow
from .artifacts import file_digest, read_json, validate, write_csv, write_json
from .catalogs import catalog_summary, load_lexicon, load_profile
from .consistency import DataTypeTaxonomy, consistency_rates, disclosure_check
from .exceptions import ConfigError
from .models import AnalysisRun
from .policy import PolicyDataFlow, PolicyResult, PolicyVocabulary, RemoteExtractor, RuleExtractor, analyze_policies
from .reporting import RunClock, build_report, merge_oem, write_report
from .serializers import PolicyDataFlowSerializer, RunConfigSerializer
from .similarity import PAIR_COLUMNS, TABLE_COLUMNS, pair_rows, similarity_table
from .static_scan import (
    discover_packages,
    permissions_document,
    scan_permission_usage,
    scan_property_occurrences,
    summarize_by_category,
    unique_property_counts,
)
from .traces import merge_windows, parse_traces, top_properties
from .vhal import PropertyCategory, PropertyId, VhalPropertyRecord, categorize_record_text

logger = logging.getLogger(__name__)

DYNAMIC_SUMMARY_KEYS = ('categories', 'frequency')
CATEGORY_COLUMNS = ['category', 'label', 'catalog', 'referenced', 'occurrences']
UNIQUE_COLUMNS = ['package', 'unique_properties']
TIMELINE_COLUMNS = ['bucket_start_s', 'property', 'count']
PAYLOAD_COLUMNS = ['package', 'bytes']
SERIES_COLUMNS = ['package', 'minute', 'bytes']


@dataclass
class PhaseOutcome:
    section: dict
    warnings: list = field(default_factory=list)
    data: dict = field(default_factory=dict)


def _unique(warnings):
    return list(dict.fromkeys(warnings))


# ---------- Static ----------

def run_static(root, profile, lexicon, out_dir, workers=None):
    """properties.json, permissions.json, static_summary.json and the two CSV tables."""
    out_dir = Path(out_dir)
    trees = discover_packages(root)
    occurrences, log = scan_property_occurrences(trees, profile, workers)
    usage, permission_log = scan_permission_usage(trees, profile.permission_catalog, workers)
    warnings = _unique(log.warnings + permission_log.warnings)

    write_json(out_dir / 'properties.json', occurrences)
    write_json(out_dir / 'permissions.json', permissions_document(usage))

    by_key = {record.key: record for record in profile.property_catalog}
    referenced = sorted({key for entries in occurrences.values() for key in entries})
    detail = {
        key: {'category': by_key[key].category.code, 'description': by_key[key].description}
        for key in referenced
    }
    unique = [[package, count] for package, count in unique_property_counts(occurrences)]
    summary = summarize_by_category(occurrences, profile, lexicon)
    catalog = catalog_summary(profile)
    permissions_total = len(set().union(*usage.values())) if usage else 0
    permissions = {package: len(found) for package, found in sorted(usage.items())}
    write_json(out_dir / 'static_summary.json', {
        'oem': profile.label,
        'permissions': permissions,
        'permissions_total': permissions_total,
        'packages': len(trees),
        'files_scanned': log.files_scanned,
        'properties': detail,
        'unique_properties': unique,
        'categories': summary,
        'catalog': catalog,
        'warnings': warnings,
    })
    write_csv(out_dir / 'categories.csv', [
        (category.code, category.label, catalog['categories'][category.code],
         summary['distinct'][category.code], summary['occurrences'][category.code])
        for category in PropertyCategory.ordered()
    ], CATEGORY_COLUMNS)
    write_csv(out_dir / 'unique_properties.csv', unique, UNIQUE_COLUMNS)

    section = {
        'catalog': catalog,
        'referenced': summary,
        'unique_properties': unique,
        'permissions': permissions,
        'permissions_total': permissions_total,
        'packages': len(trees),
        'files_scanned': log.files_scanned,
    }
    return PhaseOutcome(section=section, warnings=warnings, data={'properties': detail})


def run_similarity(profiles, threshold, table_path, pairs_path=None):
    rows, pairs_by_row = similarity_table(profiles, threshold)
    write_csv(table_path, rows, TABLE_COLUMNS)
    pairs_path = pairs_path or Path(table_path).with_name('pairs.csv')
    write_csv(pairs_path, pair_rows(rows, pairs_by_row), PAIR_COLUMNS)
    return rows


# ---------- Dynamic ----------

def run_dynamic(traces, profile, out_dir, window=None, bucket=None, spacing_ms=None, workers=None):
    """dynamic.json, dynamic_summary.json and timeline.csv for one or more (trace, package) inputs."""
    config = settings.AUDITOR
    window = window or config['WINDOW_SECONDS']
    bucket = bucket or config['BUCKET_SECONDS']
    windows = parse_traces(
        traces, window, spacing_ms or config['TRACE_SPACING_MS'], workers or config['SCAN_WORKERS'],
    )
    document, combined, timeline, warnings = merge_windows(windows, profile, bucket)
    out_dir = Path(out_dir)
    write_json(out_dir / 'dynamic.json', document)
    write_csv(out_dir / 'timeline.csv', timeline, TIMELINE_COLUMNS)

    frequency = document['frequency']
    section = {
        'categories': combined.categories,
        'total': combined.total,
        'packages': {package: sum(counts.values()) for package, counts in document.items()
                     if package not in DYNAMIC_SUMMARY_KEYS},
        'top_properties': [[key, count, frequency[key]] for key, count in top_properties(combined)],
        'window_seconds': window,
    }
    write_json(out_dir / 'dynamic_summary.json', {**section, 'warnings': list(warnings)})
    return PhaseOutcome(section=section, warnings=warnings, data={'document': document})


# ---------- Network ----------

def run_network(out_dir, pcaps=(), flows=None, ps=None, netstat=None, dest_map=None, detectors=None, oem=None,
                window=None):
    """network.json, payload_per_app.csv and payload_series.csv."""
    destination_map = netflow.DestinationMap.load(dest_map)
    document, payload, series = netflow.analyze_network(
        pcaps=pcaps,
        flows_path=flows,
        ps_path=ps,
        netstat_path=netstat,
        destination_map=destination_map,
        detectors=netflow.load_detectors(detectors),
        bin_seconds=settings.AUDITOR['SERIES_BIN_SECONDS'],
        window_seconds=window,
    )
    document['oem'] = oem
    out_dir = Path(out_dir)
    write_json(out_dir / 'network.json', document)
    write_csv(out_dir / 'payload_per_app.csv', payload, PAYLOAD_COLUMNS)
    write_csv(out_dir / 'payload_series.csv', series, SERIES_COLUMNS)
    section = {key: value for key, value in document.items() if key not in ('warnings', 'oem')}
    return PhaseOutcome(section=section, warnings=list(document['warnings']), data={'document': document})


# ---------- Policy ----------

def make_extractor(kind=None, endpoint=None, vocabulary=None):
    config = settings.AUDITOR
    kind = kind or config['EXTRACTOR']
    if kind == 'rule':
        return RuleExtractor(vocabulary)
    if kind == 'remote':
        endpoint = endpoint or config['EXTRACTOR_URL']
        if not endpoint:
            raise ConfigError("required for the remote extractor", field='endpoint')
        return RemoteExtractor(endpoint)
    raise ConfigError(f"unknown extractor {kind!r}", field='extractor')


def run_policy(documents, out_dir, extractor=None, endpoint=None, chunk_sentences=None):
    """flows.json and policy_summary.json for [(path, kind)] documents."""
    vocabulary = PolicyVocabulary.load()
    result = analyze_policies(
        documents,
        extractor=make_extractor(extractor, endpoint, vocabulary),
        max_sentences=chunk_sentences,
        vocabulary=vocabulary,
    )
    out_dir = Path(out_dir)
    write_json(out_dir / 'flows.json', result.flows_document())
    summary = result.summary()
    write_json(out_dir / 'policy_summary.json', summary)
    section = {key: value for key, value in summary.items() if key != 'warnings'}
    return PhaseOutcome(section=section, warnings=list(result.warnings), data={'flows': result.flows})


def load_flows(path):
    """flows.json written by parse-policy (or any extractor) -> PolicyDataFlow list."""
    data = read_json(path, field='flows')
    if not isinstance(data, list):
        raise ConfigError("expected a JSON array of flows", field='flows')
    items = validate(PolicyDataFlowSerializer, data, field='flows', many=True)
    return [
        PolicyDataFlow(
            action_verb=item['action_verb'],
            sentence=item['sentence'],
            purpose_category=item['purpose_category'],
            specific_purpose=item['specific_purpose'],
            entity_type=item['entity_type'] or ('third party' if item['third_party'] else 'first party'),
            data_types=tuple(item['data_types']),
            data_sources=tuple(item['data_sources']),
            third_party=item['third_party'],
            third_party_name=item['third_party_name'] or None,
            exclusion=item['exclusion'] or None,
            negated=item['negated'],
            document=item['document'],
            sentence_text=item['sentence_text'],
        )
        for item in items
    ]


# ---------- Consistency ----------

def collected_records(lexicon, profile=None, static_properties=None, dynamic_document=None, oem=''):
    """Distinct properties seen in static or dynamic evidence, as catalog records."""
    keys = set(static_properties or ())
    for package, counts in (dynamic_document or {}).items():
        if package not in DYNAMIC_SUMMARY_KEYS:
            keys.update(counts)
    records = []
    for key in sorted(keys):
        record = profile.lookup(key) if profile is not None else None
        if record is None:
            detail = (static_properties or {}).get(key)
            prop = PropertyId.parse(key)
            if detail:
                category = PropertyCategory.from_code(detail['category'])
                description = detail['description']
            else:
                category = categorize_record_text(prop.symbolic, '', lexicon)
                description = ''
            record = VhalPropertyRecord(id=prop, description=description, category=category, oem=oem)
        records.append(record)
    return records


def run_consistency(oem, records, flows, taxonomy, out_dir, findings=()):
    verdicts = disclosure_check(records, flows, taxonomy)
    report = consistency_rates(oem, verdicts, flows, findings)
    section = report.as_dict()
    write_json(Path(out_dir) / 'consistency.json', section)
    return PhaseOutcome(section=section)


# ---------- Run config ----------

CONFIG_OVERRIDES = {
    'threshold': ('similarity', 'threshold'),
    'window': ('dynamic', 'window'),
    'bucket': ('dynamic', 'bucket'),
    'extractor': ('policy', 'extractor'),
    'endpoint': ('policy', 'endpoint'),
}


def load_run_config(path, **overrides):
    """Read and validate a run config; non-None overrides win over file values."""
    path = Path(path)
    data = read_json(path, field='config')
    if not isinstance(data, dict):
        raise ConfigError("run config must be a JSON object", field='config')
    base_dir = path.resolve().parent
    if data.get('out') and not Path(data['out']).is_absolute():
        data['out'] = str(base_dir / data['out'])
    for name, value in overrides.items():
        if value is None:
            continue
        if name in CONFIG_OVERRIDES:
            section, key = CONFIG_OVERRIDES[name]
            if isinstance(data.get(section), dict):
                data[section][key] = value
        else:
            data[name] = str(value) if name == 'out' else value
    config = validate(RunConfigSerializer, data, context={'base_dir': base_dir})
    if not config.get('out'):
        raise ConfigError("an output directory is required (--out or \"out\")", field='out')
    return config


@dataclass
class RunOutcome:
    oem: str
    out_dir: Path
    phases: list
    report_path: Path | None = None


def full_run(config, clock=None):
    """static -> similarity -> dynamic -> network -> policy -> consistency -> report."""
    clock = clock or RunClock()
    out_dir = Path(config['out'])
    out_dir.mkdir(parents=True, exist_ok=True)
    oem = config['oem']
    lexicon = load_lexicon(config.get('lexicon'))
    profile = None
    if config.get('catalog'):
        profile = load_profile(config['catalog'], oem, lexicon, config.get('permissions'))
        clock.add_input(config['catalog'])
    sections, warnings, phases = {}, [], []

    def record(name, outcome):
        sections[name] = outcome.section
        warnings.extend(f"{name}: {warning}" for warning in outcome.warnings)
        phases.append(name)
        return outcome

    static = dynamic = network = policy = None
    if 'static' in config:
        clock.add_input(config['static']['root'])
        static = record('static', run_static(config['static']['root'], profile, lexicon, out_dir))
    if 'similarity' in config:
        others = [
            load_profile(catalog, label, lexicon)
            for label, catalog in sorted(config['similarity']['catalogs'].items())
        ]
        threshold = config['similarity'].get('threshold')
        if threshold is None:
            threshold = settings.AUDITOR['THRESHOLD']
        rows = run_similarity([profile, *others], threshold, out_dir / 'similarity.csv')
        sections.setdefault('static', {'catalog': catalog_summary(profile)})['similarity'] = rows
        phases.append('similarity')
    if 'dynamic' in config:
        dynamic_config = config['dynamic']
        traces = [(item['trace'], item['package']) for item in dynamic_config['traces']]
        for trace, _ in traces:
            clock.add_input(trace)
        dynamic = record('dynamic', run_dynamic(
            traces, profile, out_dir, dynamic_config.get('window'), dynamic_config.get('bucket'),
        ))
    if 'network' in config:
        net = config['network']
        for item in [*net['pcaps'], net.get('flows'), net['ps'], net['netstat']]:
            if item:
                clock.add_input(item)
        network = record('network', run_network(
            out_dir, pcaps=net['pcaps'], flows=net.get('flows'), ps=net['ps'], netstat=net['netstat'],
            dest_map=net.get('dest_map'), detectors=net.get('detectors'), oem=oem, window=net.get('window'),
        ))
    if 'policy' in config:
        pol = config['policy']
        documents = [(item['path'], item['kind']) for item in pol['documents']]
        for path, _ in documents:
            clock.add_input(path)
        policy = record('policy', run_policy(
            documents, out_dir, pol.get('extractor'), pol.get('endpoint'), pol.get('chunk_sentences'),
        ))
    if policy is not None and (static is not None or dynamic is not None):
        taxonomy = DataTypeTaxonomy.load(config.get('taxonomy'))
        records = collected_records(
            lexicon,
            profile=profile,
            static_properties=static.data['properties'] if static else None,
            dynamic_document=dynamic.data['document'] if dynamic else None,
            oem=oem,
        )
        findings = network.section['findings'] if network else ()
        record('consistency', run_consistency(oem, records, policy.data['flows'], taxonomy, out_dir, findings))

    report = build_report(oem, sections, warnings)
    report_path = write_report(out_dir, report)
    return RunOutcome(oem=oem, out_dir=out_dir, phases=phases, report_path=report_path)


def check_consistency(out_dir, flows_path, static_dir=None, dynamic_dir=None, network_dir=None,
                      taxonomy_path=None, lexicon_path=None, catalog_path=None, oem=None):
    """Consistency and report from outputs of earlier standalone phases.

    Each section is read back from the summary its phase wrote, so the report
    matches the one full-run builds over the same inputs.
    """
    if static_dir is None and dynamic_dir is None:
        raise ConfigError("needs --static or --dynamic evidence", field='collected')
    lexicon = load_lexicon(lexicon_path)
    static_summary = read_json(Path(static_dir) / 'static_summary.json', field='static') if static_dir else None
    dynamic_document = read_json(Path(dynamic_dir) / 'dynamic.json', field='dynamic') if dynamic_dir else None
    network_document = read_json(Path(network_dir) / 'network.json', field='network') if network_dir else None
    oem = merge_oem(
        oem,
        static_summary.get('oem') if static_summary else None,
        network_document.get('oem') if network_document else None,
    ) or 'unlabelled'
    profile = load_profile(catalog_path, oem, lexicon) if catalog_path else None
    flows = load_flows(flows_path)
    records = collected_records(
        lexicon,
        profile=profile,
        static_properties=static_summary['properties'] if static_summary else None,
        dynamic_document=dynamic_document,
        oem=oem,
    )
    findings = network_document.get('findings', []) if network_document else []
    outcome = run_consistency(oem, records, flows, DataTypeTaxonomy.load(taxonomy_path), out_dir, findings)

    sections = {'consistency': outcome.section}
    warnings = []
    if static_summary:
        sections['static'] = _static_section_from_summary(static_summary)
        warnings.extend(f"static: {warning}" for warning in static_summary.get('warnings', []))
    if dynamic_document:
        summary = _optional_json(Path(dynamic_dir) / 'dynamic_summary.json', 'dynamic')
        if summary is not None:
            sections['dynamic'] = {key: value for key, value in summary.items() if key != 'warnings'}
            warnings.extend(f"dynamic: {warning}" for warning in summary.get('warnings', []))
        else:
            sections['dynamic'] = _dynamic_section_from_document(dynamic_document)
    if network_document:
        sections['network'] = {
            key: value for key, value in network_document.items() if key not in ('warnings', 'oem')
        }
        warnings.extend(f"network: {warning}" for warning in network_document.get('warnings', []))
    summary = _optional_json(Path(flows_path).with_name('policy_summary.json'), 'policy')
    if summary is not None:
        sections['policy'] = {key: value for key, value in summary.items() if key != 'warnings'}
        warnings.extend(f"policy: {warning}" for warning in summary.get('warnings', []))
    else:
        sections['policy'] = _policy_section_from_flows(flows)
    report = build_report(oem, sections, warnings)
    return write_report(out_dir, report)


def _optional_json(path, field):
    return read_json(path, field=field) if path.is_file() else None


def _static_section_from_summary(summary):
    unique = summary['unique_properties']
    return {
        'catalog': summary['catalog'],
        'referenced': summary['categories'],
        'unique_properties': unique,
        'permissions': summary.get('permissions', {}),
        'permissions_total': summary.get('permissions_total', 0),
        'packages': summary.get('packages', len(unique)),
        'files_scanned': summary.get('files_scanned'),
    }


def _dynamic_section_from_document(document):
    """Section for a dynamic.json written without its summary; the window is the configured default."""
    properties = {}
    packages = {}
    for package, counts in document.items():
        if package in DYNAMIC_SUMMARY_KEYS:
            continue
        packages[package] = sum(counts.values())
        for key, count in counts.items():
            properties[key] = properties.get(key, 0) + count
    ranked = sorted(properties.items(), key=lambda item: (-item[1], item[0]))[:10]
    return {
        'categories': document['categories'],
        'total': sum(properties.values()),
        'packages': packages,
        'top_properties': [[key, count, document['frequency'].get(key, 0.0)] for key, count in ranked],
        'window_seconds': settings.AUDITOR['WINDOW_SECONDS'],
    }


def _policy_section_from_flows(flows):
    """Section for a flows file with no policy summary beside it."""
    section = PolicyResult(flows=list(flows), chunks=None, extractor=None).summary()
    section.pop('warnings')
    section['documents'] = [
        {'source': source, 'sentences': None} for source in dict.fromkeys(flow.document for flow in flows)
    ]
    return section


# ---------- Run history ----------

def record_run(oem, status, exit_code, phases, out_dir, started_at, finished_at):
    """Store one AnalysisRun; a missing table only costs a warning."""
    report = Path(out_dir) / 'report.json'
    try:
        return AnalysisRun.objects.create(
            oem=oem,
            status=status,
            exit_code=exit_code,
            phases=list(phases),
            out_dir=str(out_dir),
            report_digest=file_digest(report) if report.is_file() else '',
            started_at=started_at,
            finished_at=finished_at,
        )
    except DatabaseError as exc:
        logger.warning("run not recorded (%s); run `manage.py migrate` first", exc)
        return None
