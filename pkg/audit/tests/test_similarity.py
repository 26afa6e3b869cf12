# audit/tests/test_similarity.py
import random
from fractions import Fraction

from django.test import SimpleTestCase

from audit.exceptions import DomainError
from audit.pipeline import run_similarity
from audit.similarity import different_props, jaccard, similar_pairs, similarity_table, token_set

from .fixtures import make_workdir, named_profile

OEM_A = ['HVAC_FAN_SPEED', 'HVAC_TEMPERATURE_SET', 'SEAT_BELT_BUCKLED']
OEM_B = ['HVAC_FAN_LEVEL', 'SEAT_BELT_STATE', 'DOOR_LOCK']
TOKENS = ['HVAC', 'FAN', 'SEAT', 'BELT', 'SPEED', 'LEVEL', 'STATE', 'DOOR', 'LOCK', 'INFO', 'EV', 'GEAR']


def exhaustive_pairs(names_a, names_b, threshold):
    cutoff = Fraction(threshold).limit_denominator(10 ** 6)
    found = set()
    for a in set(names_a):
        for b in set(names_b):
            ta, tb = token_set(a), token_set(b)
            if Fraction(len(ta & tb), len(ta | tb)) >= cutoff:
                found.add((a, b))
    return found


class JaccardTest(SimpleTestCase):
    """Test the token-set Jaccard score"""

    def test_basic_properties(self):
        """Test identity, disjointness and symmetry"""
        a, b = token_set('HVAC_FAN_SPEED'), token_set('HVAC_FAN_LEVEL')
        self.assertEqual(jaccard(a, a), 1.0)
        self.assertEqual(jaccard(a, token_set('DOOR_LOCK')), 0.0)
        self.assertEqual(jaccard(a, b), jaccard(b, a))
        self.assertEqual(jaccard(a, b), 0.5)

    def test_empty_token_set(self):
        """Test that an empty token set is outside the domain"""
        with self.assertRaises(DomainError):
            jaccard(frozenset(), frozenset({'HVAC'}))
        with self.assertRaises(DomainError):
            token_set('')


class SimilarPairsTest(SimpleTestCase):
    """Test cross-OEM similar pair counting"""

    def test_pairs_at_threshold(self):
        """Test that pairs at exactly the threshold qualify and the best come first"""
        pairs, count = similar_pairs(OEM_A, OEM_B, 0.2)
        self.assertEqual(count, 3)
        self.assertEqual(
            [(pair.property_a, pair.property_b) for pair in pairs],
            [
                ('HVAC_FAN_SPEED', 'HVAC_FAN_LEVEL'),
                ('SEAT_BELT_BUCKLED', 'SEAT_BELT_STATE'),
                ('HVAC_TEMPERATURE_SET', 'HVAC_FAN_LEVEL'),
            ],
        )
        self.assertEqual(pairs[-1].score, 0.2)

    def test_threshold_monotonic(self):
        """Test that raising the threshold never adds pairs"""
        counts = [similar_pairs(OEM_A, OEM_B, threshold)[1] for threshold in (0.1, 0.2, 0.5, 0.75, 1.0)]
        self.assertEqual(counts, sorted(counts, reverse=True))
        self.assertEqual(counts[2], 2)

    def test_threshold_domain(self):
        """Test that thresholds outside (0, 1] are rejected"""
        for threshold in (0, -0.1, 1.5):
            with self.assertRaises(DomainError):
                similar_pairs(OEM_A, OEM_B, threshold)

    def test_matches_exhaustive_loop(self):
        """Test the indexed search against the all-pairs oracle on random catalogs"""
        rng = random.Random(20)
        for _ in range(100):
            names = []
            for _ in range(2):
                size = rng.randint(1, 50)
                names.append({
                    '_'.join(rng.sample(TOKENS, rng.randint(1, 4))) for _ in range(size)
                })
            threshold = rng.choice([0.1, 0.2, 0.25, 0.5, 1.0])
            pairs, count = similar_pairs(names[0], names[1], threshold)
            found = {(pair.property_a, pair.property_b) for pair in pairs}
            self.assertEqual(found, exhaustive_pairs(names[0], names[1], threshold))
            self.assertEqual(count, len(found))


class DifferentPropsTest(SimpleTestCase):
    """Test the leftover-property column"""

    def test_reference_cells(self):
        """Test the six reference comparison cells"""
        cells = [
            ((753, 437), 316),
            ((192, 437), 0),
            ((753, 105), 648),
            ((435, 105), 330),
            ((435, 109), 326),
            ((192, 109), 83),
        ]
        for (total, similar), expected in cells:
            self.assertEqual(different_props(total, similar), expected)


class SimilarityTableTest(SimpleTestCase):
    """Test the comparison table and its CSV files"""

    def test_table_rows(self):
        """Test one row per catalog pair with clamped differences"""
        rows, pairs = similarity_table([named_profile('A', OEM_A), named_profile('B', OEM_B)], 0.2)
        self.assertEqual(rows, [{'set1': 'A', 'set2': 'B', 'similar_count': 3, 'diff_set1': 0, 'diff_set2': 0}])
        self.assertEqual(len(pairs[0]), 3)

    def test_engineered_reference_row(self):
        """Test a catalog pair built to give 105 similar pairs between 753 and 435 properties"""
        first = [f"P{index}_ALPHA" for index in range(105)] + [f"Q{index}_GAMMA" for index in range(648)]
        second = [f"P{index}_BETA" for index in range(105)] + [f"R{index}_DELTA" for index in range(330)]
        rows, pairs = similarity_table([named_profile('OEM-A', first), named_profile('OEM-B', second)], 0.2)
        self.assertEqual(
            rows, [{'set1': 'OEM-A', 'set2': 'OEM-B', 'similar_count': 105, 'diff_set1': 648, 'diff_set2': 330}],
        )
        self.assertEqual({pair.score for pair in pairs[0]}, {1 / 3})

    def test_needs_two_catalogs(self):
        """Test that a single catalog cannot be compared"""
        with self.assertRaises(DomainError):
            similarity_table([named_profile('A', OEM_A)])

    def test_csv_outputs(self):
        """Test the table CSV columns and the pairs companion"""
        workdir = make_workdir(self)
        table = workdir / 'similarity.csv'
        run_similarity([named_profile('A', OEM_A), named_profile('B', OEM_B)], 0.5, table)
        self.assertEqual(table.read_text().splitlines(), [
            'set1,set2,similar_count,diff_set1,diff_set2',
            'A,B,2,1,1',
        ])
        pairs = (workdir / 'pairs.csv').read_text().splitlines()
        self.assertEqual(pairs[0], 'set1,set2,property_a,property_b,score')
        self.assertEqual(pairs[1], 'A,B,HVAC_FAN_SPEED,HVAC_FAN_LEVEL,0.5')
