# audit/similarity.py
"""Cross-OEM comparison of property names by token-set Jaccard similarity.

Two numbers are easy to confuse here: ``jaccard`` is a score in [0, 1] for one
pair of names, while the "similar" column of the comparison table is a count
of qualifying cross pairs (it can exceed either catalog's size).
"""
import logging
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

from .exceptions import DomainError
from .vhal import tokenize

logger = logging.getLogger(__name__)

TABLE_COLUMNS = ['set1', 'set2', 'similar_count', 'diff_set1', 'diff_set2']
PAIR_COLUMNS = ['set1', 'set2', 'property_a', 'property_b', 'score']


@dataclass(frozen=True)
class SimilarPair:
    property_a: str
    property_b: str
    score: float


def token_set(name):
    tokens = tokenize(name)
    if not tokens:
        raise DomainError(f"property name {name!r} has no tokens")
    return tokens


def jaccard_fraction(a, b):
    if not a or not b:
        raise DomainError("jaccard similarity is undefined for an empty token set")
    return Fraction(len(a & b), len(a | b))


def jaccard(a, b):
    return float(jaccard_fraction(a, b))


def _names(catalog):
    """Catalog (OemProfile or iterable of names) -> sorted unique names."""
    records = getattr(catalog, 'property_catalog', None)
    if records is not None:
        return sorted({record.key for record in records})
    return sorted(set(catalog))


def similar_pairs(catalog_a, catalog_b, threshold=0.2):
    """All cross pairs with score >= threshold, best first; returns (pairs, count)."""
    if not 0 < threshold <= 1:
        raise DomainError(f"threshold must be in (0, 1], got {threshold}")
    cutoff = Fraction(threshold).limit_denominator(10 ** 6)
    names_a, names_b = _names(catalog_a), _names(catalog_b)
    tokens_b = {name: token_set(name) for name in names_b}

    # With a positive threshold a qualifying pair shares at least one token.
    index = defaultdict(set)
    for name, tokens in tokens_b.items():
        for token in tokens:
            index[token].add(name)

    scored = []
    for name_a in names_a:
        tokens_a = token_set(name_a)
        candidates = set().union(*(index.get(token, ()) for token in tokens_a))
        for name_b in candidates:
            score = jaccard_fraction(tokens_a, tokens_b[name_b])
            if score >= cutoff:
                scored.append((score, name_a, name_b))
    scored.sort(key=lambda item: (-item[0], item[1], item[2]))
    pairs = [SimilarPair(a, b, float(score)) for score, a, b in scored]
    return pairs, len(pairs)


def different_props(total, similar):
    """Properties of one set left over after the similar pairs: max(0, total - similar)."""
    return max(0, total - similar)


def similarity_table(profiles, threshold=0.2):
    """One row per unordered profile pair, in input order."""
    if len(profiles) < 2:
        raise DomainError("similarity table needs at least two catalogs")
    rows = []
    pairs_by_row = []
    for first, second in combinations(profiles, 2):
        pairs, count = similar_pairs(first, second, threshold)
        rows.append({
            'set1': first.label,
            'set2': second.label,
            'similar_count': count,
            'diff_set1': different_props(first.total_properties, count),
            'diff_set2': different_props(second.total_properties, count),
        })
        pairs_by_row.append(pairs)
        logger.info("similarity %s vs %s: %d pairs >= %s", first.label, second.label, count, threshold)
    return rows, pairs_by_row


def pair_rows(rows, pairs_by_row):
    """Flatten pairs for pairs.csv."""
    for row, pairs in zip(rows, pairs_by_row):
        for pair in pairs:
            yield (row['set1'], row['set2'], pair.property_a, pair.property_b, round(pair.score, 6))
