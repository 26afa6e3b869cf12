# audit/reporting.py
"""report.json / report.md assembly and run metadata."""
import logging
import time
from datetime import datetime, timezone
from pathlib import Path

from vhalaudit import __version__

from .artifacts import file_digest, write_csv, write_json
from .exceptions import ConfigError, MergeError
from .vhal import PropertyCategory

logger = logging.getLogger(__name__)

NOT_RUN = 'not run'
SECTIONS = ('static', 'dynamic', 'network', 'policy', 'consistency')
CONSISTENCY_COLUMNS = ['oem', 'categories_disclosed', 'properties_disclosed', 'purposes']
OMISSION_COLUMNS = ['property', 'category', 'reason', 'data_types']


def merge_oem(*labels):
    """The one OEM label the inputs agree on; None entries are ignored."""
    found = sorted({label for label in labels if label})
    if len(found) > 1:
        raise MergeError(f"inputs disagree on the OEM: {', '.join(found)}")
    return found[0] if found else None


def build_report(oem, sections, warnings=()):
    if not any(sections.get(name) is not None for name in SECTIONS):
        raise ConfigError("no analysis ran; nothing to report")
    report = {'oem': oem, 'warnings': list(warnings)}
    for name in SECTIONS:
        section = sections.get(name)
        report[name] = section if section is not None else NOT_RUN
    return report


# ---------- Markdown ----------

def _table(headers, rows):
    lines = [
        '| ' + ' | '.join(headers) + ' |',
        '|' + '|'.join('---' for _ in headers) + '|',
    ]
    lines.extend('| ' + ' | '.join(str(cell) for cell in row) + ' |' for row in rows)
    return lines


def _static_lines(section):
    catalog = section['catalog']
    lines = ['## Property categories (static analysis)', '']
    if 'referenced' in section:
        referenced = section['referenced']['distinct']
        rows = [
            (f"{category.code}. {category.label}", catalog['categories'][category.code], referenced[category.code])
            for category in PropertyCategory.ordered()
        ]
        rows.append(('Total properties', catalog['total_properties'], section['referenced']['total']))
        rows.append(('Total permissions', catalog['total_permissions'], section['permissions_total']))
        lines += _table(['Category', 'Catalog', 'Referenced in apps'], rows)
        lines += ['', '## Unique properties per app', '']
        lines += _table(['Package', 'Unique properties'], section['unique_properties'])
    else:
        # similarity-only runs never scan sources
        rows = [
            (f"{category.code}. {category.label}", catalog['categories'][category.code])
            for category in PropertyCategory.ordered()
        ]
        rows.append(('Total properties', catalog['total_properties']))
        lines += _table(['Category', 'Catalog'], rows)
    if section.get('similarity'):
        lines += ['', '## Cross-OEM property similarity', '']
        lines += _table(
            ['Set 1', 'Set 2', 'Similar pairs', 'Different (set 1)', 'Different (set 2)'],
            [(r['set1'], r['set2'], r['similar_count'], r['diff_set1'], r['diff_set2']) for r in section['similarity']],
        )
    return lines


def _dynamic_lines(section):
    rows = [
        (f"{category.code}. {category.label}", section['categories'][category.code])
        for category in PropertyCategory.ordered()
    ]
    rows.append(('Total', section['total']))
    lines = ['## Property occurrences (dynamic analysis)', '']
    lines += _table(['Category', 'Occurrences'], rows)
    if section['top_properties']:
        lines += ['', f"Most accessed properties over {section['window_seconds']:g} s:", '']
        lines += _table(['Property', 'Occurrences', 'Hz'], section['top_properties'])
    return lines


def _network_lines(section):
    lines = ['## Network payload per app', '', f"Window: {section['window_seconds']:g} s", '']
    lines += _table(['Package', 'Bytes'], list(section['per_app'].items()))
    if section['https_per_app']:
        lines += ['', '## HTTPS payload per app', '']
        lines += _table(['Package', 'Bytes'], list(section['https_per_app'].items()))
    for title, key in (('Destinations', 'destinations'), ('HTTPS destinations', 'https_destinations')):
        if section[key]:
            lines += ['', f"## {title}", '']
            lines += _table(['Organization', 'Bytes'], list(section[key].items()))
    if section['outside_window_bytes']:
        lines += ['', f"Bytes after the window: {section['outside_window_bytes']}"]
    lines += ['', f"Request findings: {len(section['findings'])}; "
                  f"protobuf-suspected flows: {len(section['protobuf_suspected'])}"]
    return lines


def _policy_lines(section):
    return [
        '## Privacy policy', '',
        f"Documents: {len(section['documents'])}; flows: {section['flows']} "
        f"({section['disclosing_flows']} disclosing); distinct purposes: {section['purposes']}",
    ]


def _consistency_lines(section):
    lines = ['## Policy consistency', '']
    lines += _table(
        ['OEM', 'Categories disclosed', 'Properties disclosed', 'Purposes'],
        [(section['oem'], section['categories_disclosed']['rate'],
          section['properties_disclosed']['rate'], section['purposes'])],
    )
    omitted = [v for v in section['category_verdicts'] + section['datatype_verdicts'] if v['status'] == 'Omitted']
    if omitted:
        lines += ['', 'Omitted categories:', '']
        lines += [f"- {verdict['subject']} ({verdict['level'].replace('_', ' ')})" for verdict in omitted]
    return lines


def render_markdown(report):
    lines = [f"# Privacy audit: {report['oem'] or 'unlabelled'}", '']
    renderers = (
        ('static', _static_lines, 'Static analysis'),
        ('dynamic', _dynamic_lines, 'Dynamic analysis'),
        ('network', _network_lines, 'Network analysis'),
        ('policy', _policy_lines, 'Privacy policy'),
        ('consistency', _consistency_lines, 'Policy consistency'),
    )
    for name, render, title in renderers:
        section = report[name]
        if section == NOT_RUN:
            lines += [f"## {title}", '', f"_{NOT_RUN}_"]
        else:
            lines += render(section)
        lines.append('')
    if report['warnings']:
        lines += ['## Warnings', '']
        lines += [f"- {warning}" for warning in report['warnings']]
        lines.append('')
    return '\n'.join(lines)


# ---------- Bundle ----------

def write_report(out_dir, report):
    """report.json, report.md and the consistency CSV companions."""
    out_dir = Path(out_dir)
    path = write_json(out_dir / 'report.json', report)
    (out_dir / 'report.md').write_text(render_markdown(report), encoding='utf-8')
    consistency = report['consistency']
    if consistency != NOT_RUN:
        write_csv(out_dir / 'consistency.csv', [(
            consistency['oem'], consistency['categories_disclosed']['rate'],
            consistency['properties_disclosed']['rate'], consistency['purposes'],
        )], CONSISTENCY_COLUMNS)
        write_csv(out_dir / 'omissions.csv', [
            (row['property'], row['category'], row['reason'], ';'.join(row['data_types']))
            for row in consistency['omissions']
        ], OMISSION_COLUMNS)
    logger.info("report written to %s", path)
    return path


class RunClock:
    """Wall time and input digests for run_meta.json, kept out of the report itself."""

    def __init__(self):
        self.started_at = datetime.now(timezone.utc)
        self._start = time.monotonic()
        self.inputs = {}

    def add_input(self, path):
        path = Path(path)
        if path.is_file():
            self.inputs[str(path)] = file_digest(path)
        elif path.is_dir():
            for item in sorted(p for p in path.rglob('*') if p.is_file()):
                self.inputs[str(item)] = file_digest(item)

    def write(self, out_dir, phases, status='ok'):
        finished = datetime.now(timezone.utc)
        meta = {
            'version': __version__,
            'status': status,
            'phases': list(phases),
            'started_at': self.started_at.isoformat(),
            'finished_at': finished.isoformat(),
            'wall_seconds': round(time.monotonic() - self._start, 3),
            'inputs': self.inputs,
        }
        write_json(Path(out_dir) / 'run_meta.json', meta)
        return finished
