# audit/consistency.py
"""Collected properties vs. policy disclosures.

Properties map to data-type categories through the taxonomy; a data type is
disclosed when a non-negated flow with a disclosure verb names a data type
sharing a content token with it.
"""
import logging
import re
from collections import defaultdict
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

from django.conf import settings

from .artifacts import load_validated
from .exceptions import ConfigError
from .policy import distinct_purposes
from .serializers import TaxonomySerializer
from .vhal import PropertyCategory, normalize_name, tokenize

logger = logging.getLogger(__name__)

DISCLOSED = 'Disclosed'
OMITTED = 'Omitted'
NO_MATCH = 'no matching disclosure'
UNMAPPED = 'unmapped'
NOT_AVAILABLE = 'n/a'
RATE_RE = re.compile(r'^(?P<k>\d+)/(?P<n>\d+) \((?P<percent>\d+\.\d{2})%\)$')
_WORD = re.compile(r'[a-z0-9]+')


def fold(word):
    """Crude plural folding so "diagnostics" meets "diagnostic"."""
    if len(word) > 3 and word.endswith('s') and not word.endswith('ss'):
        return word[:-1]
    return word


def content_tokens(text, stopwords=frozenset()):
    return frozenset(fold(word) for word in _WORD.findall(text.lower()) if word not in stopwords)


@dataclass(frozen=True)
class TaxonomyEntry:
    name: str
    keywords: tuple = ()  # each keyword is a frozenset of property-name tokens
    categories: frozenset = frozenset()
    policy_only: bool = False
    match_tokens: frozenset = frozenset()

    def keyword_hit(self, tokens):
        return any(keyword <= tokens for keyword in self.keywords)


@dataclass(frozen=True)
class DataTypeTaxonomy:
    entries: tuple
    stopwords: frozenset = frozenset()

    @classmethod
    def from_data(cls, data):
        stopwords = frozenset(word.lower() for word in data['stopwords'])
        entries = []
        seen = set()
        for index, item in enumerate(data['categories']):
            name = item['name'].strip().lower()
            if name in seen:
                raise ConfigError(f"duplicate entry {name!r}", field=f"taxonomy.categories[{index}].name")
            seen.add(name)
            keywords = tuple(tokenize(normalize_name(keyword)) for keyword in item['keywords'])
            keyword_words = frozenset(fold(token.lower()) for keyword in keywords for token in keyword)
            entries.append(TaxonomyEntry(
                name=name,
                keywords=keywords,
                categories=frozenset(PropertyCategory.from_code(code) for code in item['categories']),
                policy_only=item['policy_only'],
                match_tokens=content_tokens(name, stopwords) | (keyword_words - stopwords),
            ))
        return cls(entries=tuple(entries), stopwords=stopwords)

    @classmethod
    def load(cls, path=None):
        path = path or settings.AUDITOR['TAXONOMY_FILE']
        return cls.from_data(load_validated(path, TaxonomySerializer, field='taxonomy'))

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class DisclosureVerdict:
    subject: str
    level: str  # property | datatype | property_category
    status: str
    supporting: tuple = ()  # (document, sentence)
    reason: str | None = None
    category: str | None = None
    data_types: tuple = ()

    def as_dict(self):
        data = {
            'subject': self.subject,
            'level': self.level,
            'status': self.status,
            'supporting': [{'document': document, 'sentence': sentence} for document, sentence in self.supporting],
        }
        if self.reason:
            data['reason'] = self.reason
        if self.category:
            data['category'] = self.category
        if self.data_types:
            data['data_types'] = list(self.data_types)
        return data


def map_property_to_datatypes(record, taxonomy):
    """Entries whose keywords hit the property name or that cover its category."""
    tokens = record.name_tokens()
    return [
        entry.name for entry in taxonomy.entries
        if not entry.policy_only and (entry.keyword_hit(tokens) or record.category in entry.categories)
    ]


def _supporting_flows(taxonomy, flows):
    """entry name -> sorted (document, sentence) refs of flows that disclose it."""
    support = defaultdict(set)
    for flow in flows:
        if not flow.discloses:
            continue
        flow_tokens = set()
        for data_type in flow.data_types:
            flow_tokens |= content_tokens(data_type, taxonomy.stopwords)
        for entry in taxonomy.entries:
            if entry.match_tokens & flow_tokens:
                support[entry.name].add((flow.document, flow.sentence))
    return {name: tuple(sorted(refs)) for name, refs in support.items()}


def disclosure_check(collected, flows, taxonomy):
    """Verdicts for each collected property, then data-type entries, then A-F categories.

    Disclosed and Omitted partition the collected properties; a category is
    judged only when at least one collected property falls in it.
    """
    collected = sorted(collected, key=lambda record: record.key)
    if not collected:
        return []
    support = _supporting_flows(taxonomy, flows)
    verdicts = []
    entry_properties = defaultdict(list)
    category_properties = defaultdict(list)

    for record in collected:
        mapped = map_property_to_datatypes(record, taxonomy)
        refs = sorted({ref for name in mapped for ref in support.get(name, ())})
        for name in mapped:
            entry_properties[name].append(record)
        if not mapped:
            status, reason = OMITTED, UNMAPPED
        elif refs:
            status, reason = DISCLOSED, None
        else:
            status, reason = OMITTED, NO_MATCH
        verdict = DisclosureVerdict(
            subject=record.key, level='property', status=status, supporting=tuple(refs),
            reason=reason, category=record.category.code, data_types=tuple(mapped),
        )
        category_properties[record.category].append(verdict)
        verdicts.append(verdict)

    for entry in taxonomy.entries:
        if not entry_properties.get(entry.name):
            continue
        refs = support.get(entry.name, ())
        verdicts.append(DisclosureVerdict(
            subject=entry.name, level='datatype', status=DISCLOSED if refs else OMITTED,
            supporting=refs, reason=None if refs else NO_MATCH,
        ))

    for category in PropertyCategory.ordered():
        members = category_properties.get(category)
        if not members:
            continue
        disclosed = [verdict for verdict in members if verdict.status == DISCLOSED]
        refs = tuple(sorted({ref for verdict in disclosed for ref in verdict.supporting}))
        verdicts.append(DisclosureVerdict(
            subject=category.label, level='property_category', status=DISCLOSED if disclosed else OMITTED,
            supporting=refs, reason=None if disclosed else NO_MATCH, category=category.code,
        ))
    return verdicts


# ---------- Rates ----------

def percent(k, n):
    return (Decimal(100 * k) / Decimal(n)).quantize(Decimal('0.01'), rounding=ROUND_HALF_UP)


def format_rate(k, n):
    """Rate string "k/n (p%)", p rounded half-up to 2 decimals; "n/a" when n is 0."""
    if n == 0:
        return NOT_AVAILABLE
    return f"{k}/{n} ({percent(k, n)}%)"


def parse_rate(text):
    """Inverse of format_rate: (k, n, Decimal percent), or None for "n/a"."""
    if text == NOT_AVAILABLE:
        return None
    match = RATE_RE.match(text)
    if not match:
        raise ValueError(f"not a rate: {text!r}")
    return int(match.group('k')), int(match.group('n')), Decimal(match.group('percent'))


def _rate(verdicts, level):
    judged = [verdict for verdict in verdicts if verdict.level == level]
    disclosed = sum(1 for verdict in judged if verdict.status == DISCLOSED)
    return {'disclosed': disclosed, 'total': len(judged), 'rate': format_rate(disclosed, len(judged))}


def omission_shares(verdicts):
    """Per A-F category: omitted properties and their share of all collected ones."""
    properties = [verdict for verdict in verdicts if verdict.level == 'property']
    shares = {}
    for category in PropertyCategory.ordered():
        omitted = sum(
            1 for verdict in properties
            if verdict.category == category.code and verdict.status == OMITTED
        )
        if omitted:
            shares[category.code] = {'omitted': omitted, 'share': format_rate(omitted, len(properties))}
    return shares


@dataclass
class ConsistencyReport:
    oem: str
    verdicts: list
    purposes: int
    purpose_list: list = field(default_factory=list)
    findings: list = field(default_factory=list)

    def categories(self):
        return _rate(self.verdicts, 'datatype')

    def properties(self):
        return _rate(self.verdicts, 'property')

    def omissions(self):
        return [
            {
                'property': verdict.subject,
                'category': verdict.category,
                'reason': verdict.reason,
                'data_types': list(verdict.data_types),
            }
            for verdict in self.verdicts
            if verdict.level == 'property' and verdict.status == OMITTED
        ]

    def as_dict(self):
        by_level = defaultdict(list)
        for verdict in self.verdicts:
            by_level[verdict.level].append(verdict.as_dict())
        return {
            'oem': self.oem,
            'categories_disclosed': self.categories(),
            'properties_disclosed': self.properties(),
            'purposes': self.purposes,
            'purpose_list': self.purpose_list,
            'omissions': self.omissions(),
            'omission_shares': omission_shares(self.verdicts),
            'datatype_verdicts': by_level['datatype'],
            'category_verdicts': by_level['property_category'],
            'property_verdicts': by_level['property'],
            'findings': self.findings,
        }


def consistency_rates(oem, verdicts, flows, findings=()):
    count, purposes = distinct_purposes(flows)
    report = ConsistencyReport(
        oem=oem, verdicts=list(verdicts), purposes=count, purpose_list=purposes, findings=list(findings),
    )
    logger.info(
        "consistency %s: categories %s, properties %s, purposes %d",
        oem, report.categories()['rate'], report.properties()['rate'], count,
    )
    return report
