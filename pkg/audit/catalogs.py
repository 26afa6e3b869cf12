# audit/catalogs.py
"""Loading OEM property catalogs, permission catalogs and category lexicons."""
import logging

from django.conf import settings

from .artifacts import read_json, validate
from .exceptions import ConfigError, NormalizationError
from .serializers import CatalogObjectSerializer, LexiconRuleSerializer
from .vhal import (
    CategoryLexicon,
    LexiconRule,
    OemProfile,
    PropertyCategory,
    PropertyId,
    VhalPropertyRecord,
    categorize_record_text,
    normalize_name,
)

logger = logging.getLogger(__name__)


def lexicon_from_rules(rules):
    for index, rule in enumerate(rules):
        for token in rule['tokens']:
            try:
                normalized = normalize_name(token)
            except NormalizationError:
                raise ConfigError(f"{token!r} has no name characters", field=f"lexicon[{index}].tokens")
            if '_' in normalized:
                raise ConfigError(f"{token!r} is not a single token", field=f"lexicon[{index}].tokens")
    return CategoryLexicon(rules=tuple(
        LexiconRule(
            tokens=frozenset(normalize_name(token) for token in rule['tokens']),
            category=PropertyCategory.from_code(rule['category']),
            priority=rule.get('priority', 0),
        )
        for rule in rules
    ))


def load_lexicon(path=None):
    path = path or settings.AUDITOR['LEXICON_FILE']
    data = read_json(path, field='lexicon')
    if not isinstance(data, list):
        raise ConfigError("lexicon must be a JSON array of rules", field='lexicon')
    return lexicon_from_rules(validate(LexiconRuleSerializer, data, field='lexicon', many=True))


def build_record(key, value, oem, lexicon):
    """One catalog entry -> VhalPropertyRecord."""
    if isinstance(value, str):
        name, description = '', value
    elif isinstance(value, dict):
        entry = validate(CatalogObjectSerializer, value, field=f"catalog.{key}")
        name, description = entry['name'], entry['description']
    else:
        raise ConfigError("value must be a description or an object", field=f"catalog.{key}")
    if not description.strip():
        raise ConfigError("description is empty", field=f"catalog.{key}")
    try:
        prop_id = PropertyId.parse(key, symbolic=name or None)
    except NormalizationError as exc:
        raise ConfigError(str(exc), field=f"catalog.{key}")
    category = categorize_record_text(prop_id.symbolic, description, lexicon)
    return VhalPropertyRecord(id=prop_id, description=description.strip(), category=category, oem=oem)


def profile_from_mapping(mapping, oem, lexicon, permissions=()):
    records = [build_record(key, value, oem, lexicon) for key, value in mapping.items()]
    records.sort(key=lambda record: record.key)
    try:
        return OemProfile(label=oem, property_catalog=tuple(records), permission_catalog=frozenset(permissions))
    except NormalizationError as exc:
        raise ConfigError(str(exc), field='catalog')


def load_permission_catalog(path):
    """Array of permission strings, or an object permission -> description."""
    data = read_json(path, field='permissions')
    if isinstance(data, dict):
        data = list(data)
    if not isinstance(data, list) or not all(isinstance(item, str) and item for item in data):
        raise ConfigError("expected an array of permission strings", field='permissions')
    return frozenset(item.strip() for item in data)


def load_profile(catalog_path, oem, lexicon, permissions_path=None):
    mapping = read_json(catalog_path, field='catalog')
    if not isinstance(mapping, dict) or not mapping:
        raise ConfigError("catalog must be a non-empty JSON object", field='catalog')
    permissions = load_permission_catalog(permissions_path) if permissions_path else ()
    profile = profile_from_mapping(mapping, oem, lexicon, permissions)
    logger.info(
        "loaded %s catalog: %d properties, %d permissions",
        oem, profile.total_properties, profile.total_permissions,
    )
    return profile


def catalog_summary(profile):
    """Per-category catalog counts plus the property and permission totals."""
    counts = profile.category_counts()
    return {
        'categories': {category.code: counts[category] for category in PropertyCategory.ordered()},
        'total_properties': profile.total_properties,
        'total_permissions': profile.total_permissions,
    }
