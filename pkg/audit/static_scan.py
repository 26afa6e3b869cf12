# audit/static_scan.py
"""Keyword scan of decompiled APK source trees.

Layout: every directory directly under the scan root is one package (named by
its reverse-DNS package name), as produced by jadx. Produces the property
occurrence map and the vendor permission map.
"""
import logging
import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from django.conf import settings

from .exceptions import ScanError
from .vhal import PropertyCategory, categorize_record_text, parse_numeric

logger = logging.getLogger(__name__)

# Identifier-ish runs; anything else delimits a token.
TOKEN_RE = re.compile(r'[A-Za-z0-9_]+')
MANIFEST_NAME = 'AndroidManifest.xml'


@dataclass(frozen=True)
class SourceTree:
    root: Path
    extensions: tuple = ('.java', '.smali', '.xml', '.txt')

    @property
    def package(self):
        return self.root.name

    def files(self):
        """Regular files to scan, lexicographic, each once."""
        if not self.root.is_dir():
            raise ScanError(f"scan root does not exist: {self.root}")
        wanted = {ext.lower() for ext in self.extensions}
        found = [
            path for path in self.root.rglob('*')
            if path.is_file() and not path.is_symlink()
            and (path.suffix.lower() in wanted or path.name == MANIFEST_NAME)
        ]
        return sorted(found, key=lambda path: path.relative_to(self.root).as_posix())


@dataclass
class ScanLog:
    warnings: list = field(default_factory=list)
    files_scanned: int = 0

    def skip(self, path, reason):
        message = f"skipped {path}: {reason}"
        logger.warning(message)
        self.warnings.append(message)

    def merge(self, other):
        self.warnings.extend(other.warnings)
        self.files_scanned += other.files_scanned


def discover_packages(scan_root, extensions=None):
    scan_root = Path(scan_root)
    if not scan_root.is_dir():
        raise ScanError(f"scan root does not exist: {scan_root}")
    extensions = tuple(extensions or settings.AUDITOR['SCAN_EXTENSIONS'])
    return [
        SourceTree(root=path, extensions=extensions)
        for path in sorted(scan_root.iterdir(), key=lambda p: p.name)
        if path.is_dir()
    ]


def _read(path, log):
    try:
        return path.read_text(encoding='utf-8', errors='replace')
    except OSError as exc:
        log.skip(path, exc.strerror or str(exc))
        return None


def _iter_texts(tree, log):
    for path in tree.files():
        text = _read(path, log)
        if text is not None:
            log.files_scanned += 1
            yield text


def count_tokens(text, alias_index, numeric_index):
    """Whole-token hits of catalog aliases in `text` -> Counter(key)."""
    hits = Counter()
    for match in TOKEN_RE.finditer(text):
        token = match.group()
        record = alias_index.get(token)
        if record is None and token[0].isdigit():
            numeric = parse_numeric(token)
            if numeric is not None:
                record = numeric_index.get(numeric)
        if record is not None:
            hits[record.key] += 1
    return hits


def _scan_package_properties(tree, profile):
    log = ScanLog()
    # Symbolic names only; numeric forms go through parse_numeric so that
    # 0x25400105, 0X25400105 and 624951557 all land on the same property.
    symbolic = {
        record.id.symbolic: record
        for record in profile.property_catalog
        if record.id.symbolic
    }
    numeric = profile.numeric_index()
    counts = Counter()
    for text in _iter_texts(tree, log):
        counts.update(count_tokens(text, symbolic, numeric))
    by_key = {record.key: record for record in profile.property_catalog}
    entries = {
        key: {'description': by_key[key].description, 'occurrences': count}
        for key, count in counts.items()
        if count >= 1
    }
    return tree.package, entries, log


def _run(trees, work, workers):
    workers = max(1, workers or settings.AUDITOR['SCAN_WORKERS'])
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(work, trees))


def scan_property_occurrences(trees, profile, workers=None):
    """package -> {property key -> {"description", "occurrences"}}, plus the scan log."""
    if not profile.property_catalog:
        raise ScanError(f"{profile.label} property catalog is empty")
    log = ScanLog()
    result = {}
    for package, entries, package_log in _run(trees, lambda t: _scan_package_properties(t, profile), workers):
        result[package] = entries
        log.merge(package_log)
    logger.info(
        "property scan: %d packages, %d files, %d with matches",
        len(result), log.files_scanned, sum(1 for entries in result.values() if entries),
    )
    return result, log


def permission_pattern(permission_catalog):
    """One alternation over the catalog; a permission must not be part of a longer name."""
    if not permission_catalog:
        return None
    alternatives = sorted(permission_catalog, key=lambda p: (-len(p), p))
    body = '|'.join(re.escape(p) for p in alternatives)
    return re.compile(rf'(?<![\w.])(?:{body})(?![\w.])')


def _scan_package_permissions(tree, pattern):
    log = ScanLog()
    found = set()
    if pattern is not None:
        for text in _iter_texts(tree, log):
            found.update(match.group() for match in pattern.finditer(text))
    return tree.package, found, log


def scan_permission_usage(trees, permission_catalog, workers=None):
    """package -> set of catalog permissions referenced in manifest or sources."""
    pattern = permission_pattern(permission_catalog)
    log = ScanLog()
    result = {}
    for package, found, package_log in _run(trees, lambda t: _scan_package_permissions(t, pattern), workers):
        result[package] = found
        log.merge(package_log)
    return result, log


def unique_property_count(occurrences, package):
    """Distinct properties a package references."""
    return sum(1 for entry in occurrences[package].values() if entry['occurrences'] >= 1)


def unique_property_counts(occurrences):
    """[(package, count)] by descending count, then package name."""
    rows = [(package, unique_property_count(occurrences, package)) for package in occurrences]
    return sorted(rows, key=lambda row: (-row[1], row[0]))


def summarize_by_category(occurrences, profile, lexicon, package=None):
    """Distinct-property counts per category (and occurrence totals).

    Properties missing from the catalog fall back to lexicon categorization of
    their key. `package` restricts the summary to one package.
    """
    by_key = {record.key: record for record in profile.property_catalog}
    packages = [package] if package is not None else list(occurrences)
    seen = {}
    totals = Counter()
    for name in packages:
        for key, entry in occurrences[name].items():
            record = by_key.get(key)
            category = record.category if record else categorize_record_text(key, '', lexicon)
            seen[key] = category
            totals[category] += entry['occurrences']
    counts = Counter(seen.values())
    return {
        'distinct': {category.code: counts.get(category, 0) for category in PropertyCategory.ordered()},
        'occurrences': {category.code: totals.get(category, 0) for category in PropertyCategory.ordered()},
        'total': len(seen),
    }


def permissions_document(usage):
    """package -> sorted permission array, as written to permissions.json."""
    return {package: sorted(found) for package, found in usage.items()}
