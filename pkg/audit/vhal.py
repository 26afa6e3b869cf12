# audit/vhal.py
"""Vehicle property identifiers, the six-way property taxonomy and the
token lexicon that assigns properties to it.

Everything here is immutable and shared read-only by every phase.
"""
import re
from dataclasses import dataclass, field
from enum import Enum

from .exceptions import NormalizationError

SYMBOLIC_RE = re.compile(r'^[A-Z0-9]+(_[A-Z0-9]+)*$')
NUMERIC_RE = re.compile(r'^(0[xX][0-9A-Fa-f]+|\d+)$')
_SEPARATORS = re.compile(r'[-\s.]+')
_UNDERSCORES = re.compile(r'_+')
_INVALID = re.compile(r'[^A-Z0-9_]')

MAX_PROPERTY_ID = 0xFFFFFFFF


class PropertyCategory(Enum):
    USER_PREFERENCES = ('A', 'User Preferences and Notifications')
    DRIVING_ASSISTANCE = ('B', 'Driving Assistance and Mode Security')
    ENERGY_MAINTENANCE = ('C', 'Energy and Maintenance')
    LIGHTING = ('D', 'Lighting')
    DIAGNOSTIC_MONITORING = ('E', 'Diagnostic and Monitoring')
    CLIMATE_COMFORT = ('F', 'Climate and Comfort')
    UNCATEGORIZED = ('U', 'Uncategorized')

    def __init__(self, code, label):
        self.code = code
        self.label = label

    @classmethod
    def from_code(cls, code):
        for category in cls:
            if category.code == code:
                return category
        raise ValueError(f"unknown property category {code!r}")

    @classmethod
    def ordered(cls):
        """A..F followed by Uncategorized."""
        return list(cls)


def normalize_name(raw):
    """Fold a property name into its canonical symbolic form."""
    if raw is None:
        raise NormalizationError("property name is empty")
    name = _SEPARATORS.sub('_', str(raw).strip().upper())
    name = _INVALID.sub('_', name)
    name = _UNDERSCORES.sub('_', name).strip('_')
    if not name:
        raise NormalizationError(f"property name {raw!r} is empty after normalization")
    return name


def tokenize(name):
    """Underscore tokens of a normalized name, as a frozenset."""
    return frozenset(token for token in name.split('_') if token)


def parse_numeric(raw):
    """Decimal or 0x-hex property ID -> int, or None when `raw` is not numeric."""
    text = str(raw).strip().strip('\'"')
    if not NUMERIC_RE.match(text):
        return None
    value = int(text, 16) if text[:2].lower() == '0x' else int(text)
    if value > MAX_PROPERTY_ID:
        return None
    return value


def format_hex(value):
    return f"0x{value:08x}"


@dataclass(frozen=True)
class PropertyId:
    numeric: int | None = None
    symbolic: str | None = None

    def __post_init__(self):
        if self.numeric is None and self.symbolic is None:
            raise NormalizationError("a property needs a numeric or a symbolic id")
        if self.symbolic is not None and not SYMBOLIC_RE.match(self.symbolic):
            raise NormalizationError(f"{self.symbolic!r} is not a normalized property name")

    @classmethod
    def parse(cls, raw, symbolic=None):
        numeric = parse_numeric(raw)
        if numeric is not None:
            return cls(numeric=numeric, symbolic=normalize_name(symbolic) if symbolic else None)
        return cls(symbolic=normalize_name(raw))

    @property
    def key(self):
        """The key used in every output: symbolic when known, else hex."""
        return self.symbolic if self.symbolic else format_hex(self.numeric)

    def aliases(self):
        """Every textual form this property can be referenced by."""
        forms = set()
        if self.symbolic:
            forms.add(self.symbolic)
        if self.numeric is not None:
            forms.add(format_hex(self.numeric))
            forms.add(str(self.numeric))
        return forms

    def __str__(self):
        return self.key


@dataclass(frozen=True)
class VhalPropertyRecord:
    id: PropertyId
    description: str
    category: PropertyCategory
    oem: str

    @property
    def key(self):
        return self.id.key

    def name_tokens(self):
        if self.id.symbolic:
            return tokenize(self.id.symbolic)
        try:
            return tokenize(normalize_name(self.description))
        except NormalizationError:
            return frozenset()


@dataclass(frozen=True)
class LexiconRule:
    tokens: frozenset
    category: PropertyCategory
    priority: int = 0


@dataclass(frozen=True)
class CategoryLexicon:
    rules: tuple = ()

    def categorize(self, tokens):
        best = None
        for rule in self.rules:
            if rule.tokens & tokens and (best is None or rule.priority > best.priority):
                best = rule
        return best.category if best else PropertyCategory.UNCATEGORIZED


def categorize_property(name, lexicon):
    """Category of a normalized property name under `lexicon`.

    Highest-priority rule sharing a token with the name wins; equal
    priorities keep the earlier rule.
    """
    return lexicon.categorize(tokenize(name))


def categorize_record_text(symbolic, description, lexicon):
    """Symbolic name when present, otherwise the description's tokens."""
    if symbolic:
        return categorize_property(symbolic, lexicon)
    try:
        return categorize_property(normalize_name(description), lexicon)
    except NormalizationError:
        return PropertyCategory.UNCATEGORIZED


@dataclass(frozen=True)
class OemProfile:
    label: str
    property_catalog: tuple = ()
    permission_catalog: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        seen = set()
        for record in self.property_catalog:
            if record.key in seen:
                raise NormalizationError(f"duplicate property {record.key} in {self.label} catalog")
            seen.add(record.key)

    @property
    def total_properties(self):
        return len(self.property_catalog)

    @property
    def total_permissions(self):
        return len(self.permission_catalog)

    def alias_index(self):
        """Every alias (symbolic, hex, decimal) -> record."""
        index = {}
        for record in self.property_catalog:
            for alias in record.id.aliases():
                index.setdefault(alias, record)
        return index

    def numeric_index(self):
        return {
            record.id.numeric: record
            for record in self.property_catalog
            if record.id.numeric is not None
        }

    def lookup(self, raw):
        """Resolve a symbolic name, hex or decimal ID to its catalog record."""
        numeric = parse_numeric(raw)
        if numeric is not None:
            return self.numeric_index().get(numeric)
        try:
            name = normalize_name(raw)
        except NormalizationError:
            return None
        for record in self.property_catalog:
            if record.id.symbolic == name:
                return record
        return None

    def category_counts(self):
        counts = {category: 0 for category in PropertyCategory.ordered()}
        for record in self.property_catalog:
            counts[record.category] += 1
        return counts
