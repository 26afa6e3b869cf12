# audit/traces.py
"""frida-trace logs -> classified VHAL accesses, histograms and access rates."""
import logging
import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from enum import IntEnum
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import DomainError, ParseError
from .vhal import PropertyCategory, PropertyId, format_hex, parse_numeric

logger = logging.getLogger(__name__)


class TraceKind(IntEnum):
    GET_PROPERTY_ID_RETURN = 1
    STUB_PROXY_GET_PROPERTY = 2
    MANAGER_EX_GET_PROPERTY = 3
    PROP_ASSIGNMENT = 4
    REGISTER_LISTENER_NOT_IN_CONFIG = 5


_ID = r"""['"]?(?P<id>0[xX][0-9A-Fa-f]+|\d+)['"]?(?![0-9A-Za-z_])"""

TRACE_PATTERNS = (
    (TraceKind.GET_PROPERTY_ID_RETURN, re.compile(r'CarPropertyValue\.getPropertyId\(\)\s*<=\s*' + _ID)),
    (TraceKind.STUB_PROXY_GET_PROPERTY, re.compile(r'ICarProperty\$Stub\$Proxy\.getProperty\(\s*' + _ID)),
    (TraceKind.MANAGER_EX_GET_PROPERTY, re.compile(r'CarPropertyManagerEx\.getProperty\(\s*' + _ID)),
    (TraceKind.PROP_ASSIGNMENT, re.compile(r'\.prop\s*=\s*' + _ID)),
    (TraceKind.REGISTER_LISTENER_NOT_IN_CONFIG,
     re.compile(r'registerListener: propId is not in config list:\s*' + _ID)),
)

# frida-trace prefixes each line with the milliseconds since the trace began.
TIMESTAMP_RE = re.compile(r'^\s*(?P<ms>\S+)\s+ms\s')


@dataclass(frozen=True)
class TraceEvent:
    timestamp: int  # ms from trace start
    package: str
    kind: TraceKind
    property: PropertyId


@dataclass
class TraceWindow:
    package: str
    start: int = 0  # ms
    duration: float = 300.0  # seconds
    events: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def end(self):
        return self.start + int(self.duration * 1000)


@dataclass
class OccurrenceHistogram:
    properties: dict
    categories: dict
    buckets: list
    timeline: list  # (bucket_start_s, property, count)

    @property
    def total(self):
        return sum(self.properties.values())


def classify_line(line):
    """(kind, PropertyId) for a VHAL access line, None for anything else."""
    for kind, pattern in TRACE_PATTERNS:
        match = pattern.search(line)
        if match:
            numeric = parse_numeric(match.group('id'))
            if numeric is None:
                return None
            return kind, PropertyId(numeric=numeric)
    return None


def parse_trace(path, package, window_seconds=300.0, spacing_ms=1):
    """Read one trace file into a window of classified events.

    Lines without a parsable `<n> ms` prefix get `line_index * spacing_ms`.
    Events are sorted stably by timestamp; events past the window end are dropped.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding='utf-8', errors='replace').splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read trace {path}: {exc.strerror or exc}")

    window = TraceWindow(package=package, duration=window_seconds)
    events = []
    for index, line in enumerate(lines):
        classified = classify_line(line)
        if classified is None:
            continue
        timestamp = index * spacing_ms
        prefix = TIMESTAMP_RE.match(line)
        if prefix:
            raw = prefix.group('ms')
            if raw.isdigit():
                timestamp = int(raw)
            else:
                window.warnings.append(f"{path.name}:{index + 1}: malformed timestamp {raw!r}")
        kind, prop = classified
        events.append(TraceEvent(timestamp=timestamp, package=package, kind=kind, property=prop))

    events.sort(key=lambda event: event.timestamp)
    kept = [event for event in events if window.start <= event.timestamp <= window.end]
    if len(kept) < len(events):
        window.warnings.append(
            f"{path.name}: {len(events) - len(kept)} events outside the {window_seconds:g} s window dropped"
        )
    window.events = kept
    for warning in window.warnings:
        logger.warning(warning)
    logger.info("trace %s (%s): %d VHAL events", path.name, package, len(kept))
    return window


def parse_traces(inputs, window_seconds=300.0, spacing_ms=1, workers=4):
    """[(path, package)] -> windows, parsed in parallel, returned in input order."""
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(lambda item: parse_trace(item[0], item[1], window_seconds, spacing_ms), inputs))


def _resolve(prop, profile):
    """Catalog key and category for an accessed property."""
    record = profile.numeric_index().get(prop.numeric) if profile is not None else None
    if record is not None:
        return record.key, record.category
    return format_hex(prop.numeric), PropertyCategory.UNCATEGORIZED


def occurrence_histogram(window, profile=None, bucket_seconds=None):
    """Raw per-property and per-category counts, plus an optional bucket series.

    Properties absent from the catalog are kept under their hex ID as
    Uncategorized.
    """
    keys = []
    categories = Counter()
    for event in window.events:
        key, category = _resolve(event.property, profile)
        keys.append(key)
        categories[category] += 1

    buckets, timeline = [], []
    if bucket_seconds:
        if bucket_seconds <= 0:
            raise DomainError("bucket width must be positive")
        bucket_ms = int(bucket_seconds * 1000)
        count = max(1, int(np.ceil(window.duration * 1000 / bucket_ms)))
        offsets = np.array([event.timestamp - window.start for event in window.events], dtype=np.int64)
        index = np.minimum(offsets // bucket_ms, count - 1) if len(offsets) else offsets
        buckets = np.bincount(index, minlength=count).tolist() if len(offsets) else [0] * count
        if keys:
            frame = pd.DataFrame({'bucket': index, 'property': keys})
            grouped = frame.groupby(['bucket', 'property']).size().reset_index(name='count')
            timeline = [
                (float(row.bucket * bucket_seconds), row.property, int(row.count))
                for row in grouped.itertuples(index=False)
            ]

    return OccurrenceHistogram(
        properties=dict(sorted(Counter(keys).items())),
        categories={category.code: categories.get(category, 0) for category in PropertyCategory.ordered()},
        buckets=buckets,
        timeline=timeline,
    )


def per_second(count, duration):
    """count / duration, half-up to 2 decimals."""
    if duration <= 0:
        raise DomainError("window duration must be positive")
    rate = Decimal(count) / Decimal(str(duration))
    return float(rate.quantize(Decimal('0.01'), rounding=ROUND_HALF_UP))


def access_frequency(window, prop, profile=None):
    """Accesses per second of one property over the window."""
    if window.duration <= 0:
        raise DomainError("window duration must be positive")
    if not isinstance(prop, PropertyId):
        record = profile.lookup(prop) if profile is not None else None
        prop = record.id if record is not None else PropertyId.parse(prop)
    if prop.numeric is None:
        return per_second(0, window.duration)
    count = sum(1 for event in window.events if event.property.numeric == prop.numeric)
    return per_second(count, window.duration)


def frequencies(histogram, duration):
    """property -> Hz for every property in a histogram."""
    return {key: per_second(count, duration) for key, count in histogram.properties.items()}


def top_properties(histogram, limit=10):
    ranked = sorted(histogram.properties.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:limit]


def merge_windows(windows, profile=None, bucket_seconds=None):
    """Several per-package windows -> the dynamic result and the combined timeline.

    Counts stay per package; categories and frequencies are taken over the
    events of every package on the shared window length.
    """
    if not windows:
        raise DomainError("no trace windows to merge")
    duration = windows[0].duration
    packages = {}
    categories = Counter()
    properties = Counter()
    timeline = Counter()
    warnings = []
    for window in windows:
        histogram = occurrence_histogram(window, profile, bucket_seconds)
        counts = packages.setdefault(window.package, Counter())
        counts.update(histogram.properties)
        categories.update(histogram.categories)
        properties.update(histogram.properties)
        for start, key, count in histogram.timeline:
            timeline[(start, key)] += count
        warnings.extend(window.warnings)
    combined = OccurrenceHistogram(
        properties=dict(sorted(properties.items())),
        categories={category.code: categories.get(category.code, 0) for category in PropertyCategory.ordered()},
        buckets=[],
        timeline=[],
    )
    document = {package: dict(sorted(counts.items())) for package, counts in sorted(packages.items())}
    document['categories'] = combined.categories
    document['frequency'] = frequencies(combined, duration)
    rows = [(start, key, count) for (start, key), count in sorted(timeline.items())]
    return document, combined, rows, warnings
