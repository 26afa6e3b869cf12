# audit/tests/test_vhal.py
from django.test import SimpleTestCase

from audit.catalogs import catalog_summary, lexicon_from_rules, load_lexicon, profile_from_mapping
from audit.exceptions import ConfigError, NormalizationError
from audit.vhal import (
    OemProfile,
    PropertyCategory,
    PropertyId,
    VhalPropertyRecord,
    categorize_property,
    normalize_name,
    parse_numeric,
    tokenize,
)

from .fixtures import CATALOG, distribution_catalog, sample_profile


class NormalizeNameTest(SimpleTestCase):
    """Test canonical property names"""

    def test_separators_fold_to_underscores(self):
        """Test that dashes, spaces and dots become single underscores"""
        self.assertEqual(normalize_name(' hvac-fan  speed '), 'HVAC_FAN_SPEED')
        self.assertEqual(normalize_name('perf.vehicle__speed'), 'PERF_VEHICLE_SPEED')

    def test_empty_name_rejected(self):
        """Test that names with nothing left after normalization are rejected"""
        for raw in ('', '   ', '___', None):
            with self.assertRaises(NormalizationError):
                normalize_name(raw)

    def test_normalization_is_idempotent(self):
        """Test that normalizing a normalized name changes nothing"""
        for raw in ('hvac-fan speed', ' Perf.Vehicle__Speed ', 'EV_BATTERY_LEVEL', 'a..b--c', 'x_', '0x25400105'):
            once = normalize_name(raw)
            self.assertEqual(normalize_name(once), once)

    def test_tokenize(self):
        """Test splitting a normalized name into its tokens"""
        self.assertEqual(tokenize('HVAC_FAN_SPEED'), frozenset({'HVAC', 'FAN', 'SPEED'}))


class PropertyIdTest(SimpleTestCase):
    """Test numeric and symbolic property identifiers"""

    def test_hex_and_decimal_agree(self):
        """Test that hex in either case and decimal forms parse to the same ID"""
        self.assertEqual(parse_numeric('0x25400105'), 624951557)
        self.assertEqual(parse_numeric('0X25400105'), 624951557)
        self.assertEqual(parse_numeric("'624951557'"), 624951557)
        self.assertIsNone(parse_numeric('0x1FFFFFFFF'))
        self.assertIsNone(parse_numeric('HVAC'))

    def test_key_prefers_symbolic(self):
        """Test that the output key is the symbolic name when one is known"""
        self.assertEqual(PropertyId.parse('0x25400105').key, '0x25400105')
        self.assertEqual(PropertyId.parse('0x25400105', symbolic='vendor gear').key, 'VENDOR_GEAR')
        self.assertEqual(PropertyId.parse('hvac_fan_speed').key, 'HVAC_FAN_SPEED')

    def test_aliases(self):
        """Test every textual form of a property"""
        prop = PropertyId.parse('0x25400105', symbolic='VENDOR_GEAR')
        self.assertEqual(prop.aliases(), {'VENDOR_GEAR', '0x25400105', '624951557'})

    def test_requires_an_id(self):
        """Test that a property without any ID is rejected"""
        with self.assertRaises(NormalizationError):
            PropertyId()


class CategorizeTest(SimpleTestCase):
    """Test the lexicon-driven six-way taxonomy"""

    def setUp(self):
        self.lexicon = load_lexicon()

    def test_highest_priority_rule_wins(self):
        """Test tie-breaking between rules that share a token with the name"""
        self.assertEqual(categorize_property('HVAC_FAN_SPEED', self.lexicon), PropertyCategory.CLIMATE_COMFORT)
        self.assertEqual(categorize_property('SEAT_BELT_BUCKLED', self.lexicon), PropertyCategory.DRIVING_ASSISTANCE)
        self.assertEqual(categorize_property('PERF_VEHICLE_SPEED', self.lexicon), PropertyCategory.DIAGNOSTIC_MONITORING)

    def test_unknown_tokens_are_uncategorized(self):
        """Test that names without lexicon tokens fall into Uncategorized"""
        self.assertEqual(categorize_property('VENDOR_THING', self.lexicon), PropertyCategory.UNCATEGORIZED)

    def test_numeric_only_property_uses_description(self):
        """Test that a hex-only catalog entry is categorized from its description"""
        profile = profile_from_mapping({'0x21400a01': 'Headlight switch state'}, 'OEM-X', self.lexicon)
        self.assertEqual(profile.property_catalog[0].category, PropertyCategory.LIGHTING)

    def test_multi_word_lexicon_token_rejected(self):
        """Test that lexicon tokens must be single name tokens"""
        with self.assertRaises(ConfigError):
            lexicon_from_rules([{'tokens': ['SEAT BELT'], 'category': 'B', 'priority': 1}])

    def test_punctuation_lexicon_token_rejected(self):
        """Test that a token with no name characters is a config error naming its rule"""
        rules = [
            {'tokens': ['HVAC'], 'category': 'F', 'priority': 20},
            {'tokens': ['LAMP', '--'], 'category': 'D', 'priority': 20},
        ]
        with self.assertRaises(ConfigError) as ctx:
            lexicon_from_rules(rules)
        self.assertEqual(ctx.exception.field, 'lexicon[1].tokens')
        self.assertIn("'--' has no name characters", str(ctx.exception))


class OemProfileTest(SimpleTestCase):
    """Test OEM profiles built from catalogs"""

    def test_catalog_summary(self):
        """Test per-category catalog counts and totals"""
        summary = catalog_summary(sample_profile())
        self.assertEqual(
            summary['categories'],
            {'A': 1, 'B': 2, 'C': 1, 'D': 1, 'E': 2, 'F': 2, 'U': 0},
        )
        self.assertEqual(summary['total_properties'], len(CATALOG))
        self.assertEqual(summary['total_permissions'], 3)

    def test_reference_catalog_distributions(self):
        """Test per-category totals of catalogs built to the three reference distributions"""
        cases = [
            ((182, 196, 136, 9, 136, 94), 753),
            ((103, 69, 10, 43, 158, 52), 435),
            ((39, 47, 11, 29, 38, 28), 192),
        ]
        for counts, total in cases:
            summary = catalog_summary(profile_from_mapping(distribution_catalog(counts), 'OEM', load_lexicon()))
            self.assertEqual(summary['categories'], dict(zip('ABCDEFU', (*counts, 0))))
            self.assertEqual(sum(summary['categories'].values()), total)
            self.assertEqual(summary['total_properties'], total)

    def test_lookup_any_alias(self):
        """Test resolving symbolic, hex and decimal references"""
        profile = sample_profile()
        self.assertEqual(profile.lookup('624951557').key, 'VENDOR_GEAR_DISPLAY')
        self.assertEqual(profile.lookup('0x25400105').key, 'VENDOR_GEAR_DISPLAY')
        self.assertEqual(profile.lookup('hvac fan speed').key, 'HVAC_FAN_SPEED')
        self.assertIsNone(profile.lookup('DOOR_LOCK'))

    def test_duplicate_properties_rejected(self):
        """Test that one property cannot appear twice in a catalog"""
        record = VhalPropertyRecord(
            id=PropertyId.parse('HVAC_FAN_SPEED'), description='Fan',
            category=PropertyCategory.CLIMATE_COMFORT, oem='OEM-A',
        )
        with self.assertRaises(NormalizationError):
            OemProfile(label='OEM-A', property_catalog=(record, record))

    def test_empty_description_rejected(self):
        """Test that catalog entries need a description"""
        with self.assertRaises(ConfigError):
            profile_from_mapping({'HVAC_FAN_SPEED': '  '}, 'OEM-A', load_lexicon())
