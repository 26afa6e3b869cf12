# audit/tests/test_reporting.py
import json

from django.test import SimpleTestCase

from audit.consistency import DataTypeTaxonomy, consistency_rates, disclosure_check
from audit.exceptions import ConfigError, MergeError
from audit.reporting import NOT_RUN, RunClock, build_report, merge_oem, render_markdown, write_report

from .fixtures import make_workdir, sample_profile, write_text
from .test_consistency import COLLECTED, FLOWS

POLICY_SECTION = {
    'documents': [{'source': 'policy.html', 'sentences': 4}],
    'flows': 3,
    'disclosing_flows': 2,
    'purposes': 2,
}


def consistency_section():
    profile = sample_profile()
    verdicts = disclosure_check([profile.lookup(key) for key in COLLECTED], FLOWS, DataTypeTaxonomy.load())
    return consistency_rates('OEM-A', verdicts, FLOWS).as_dict()


class MergeOemTest(SimpleTestCase):
    """Test OEM label agreement"""

    def test_agreeing_labels(self):
        """Test that equal and missing labels merge"""
        self.assertEqual(merge_oem('OEM-A', None, 'OEM-A'), 'OEM-A')
        self.assertIsNone(merge_oem(None, ''))

    def test_conflict(self):
        """Test that two different labels refuse to merge"""
        with self.assertRaises(MergeError) as ctx:
            merge_oem('OEM-A', 'OEM-B')
        self.assertEqual(ctx.exception.exit_status, 2)


class BuildReportTest(SimpleTestCase):
    """Test report assembly"""

    def test_missing_sections(self):
        """Test that phases that did not run are marked"""
        report = build_report('OEM-A', {'policy': POLICY_SECTION}, warnings=['policy.html: 1 markup error'])
        self.assertEqual(report['policy'], POLICY_SECTION)
        for name in ('static', 'dynamic', 'network', 'consistency'):
            self.assertEqual(report[name], NOT_RUN)
        self.assertEqual(report['warnings'], ['policy.html: 1 markup error'])

    def test_nothing_ran(self):
        """Test that an empty report is refused"""
        with self.assertRaises(ConfigError):
            build_report('OEM-A', {})

    def test_markdown(self):
        """Test the human-readable rendering"""
        report = build_report('OEM-A', {'policy': POLICY_SECTION, 'consistency': consistency_section()})
        text = render_markdown(report)
        self.assertTrue(text.startswith('# Privacy audit: OEM-A\n'))
        self.assertIn('| OEM-A | 2/5 (40.00%) | 2/4 (50.00%) | 2 |', text)
        self.assertIn('- Climate and Comfort (property category)', text)
        self.assertIn('- climate and comfort (datatype)', text)
        self.assertIn('## Static analysis\n\n_not run_', text)
        self.assertIn('Documents: 1; flows: 3 (2 disclosing); distinct purposes: 2', text)


class WriteReportTest(SimpleTestCase):
    """Test the written report bundle"""

    def setUp(self):
        self.out = make_workdir(self)

    def test_bundle(self):
        """Test report files and the consistency CSV companions"""
        report = build_report('OEM-A', {'consistency': consistency_section()})
        write_report(self.out, report)
        self.assertEqual(json.loads((self.out / 'report.json').read_text())['oem'], 'OEM-A')
        self.assertTrue((self.out / 'report.md').is_file())
        self.assertEqual(
            (self.out / 'consistency.csv').read_text(),
            'oem,categories_disclosed,properties_disclosed,purposes\n'
            'OEM-A,2/5 (40.00%),2/4 (50.00%),2\n',
        )
        self.assertEqual(
            (self.out / 'omissions.csv').read_text(),
            'property,category,reason,data_types\n'
            'HVAC_FAN_SPEED,F,no matching disclosure,climate and comfort\n'
            'SEAT_BELT_BUCKLED,B,no matching disclosure,driver safety data\n',
        )

    def test_byte_identical(self):
        """Test that the same report is written byte for byte"""
        report = build_report('OEM-A', {'policy': POLICY_SECTION})
        first = write_report(self.out / 'one', report).read_bytes()
        second = write_report(self.out / 'two', report).read_bytes()
        self.assertEqual(first, second)
        self.assertTrue(first.endswith(b'\n'))

    def test_run_meta(self):
        """Test run metadata with input digests"""
        source = write_text(self.out / 'inputs' / 'catalog.json', '{}')
        clock = RunClock()
        clock.add_input(source.parent)
        clock.write(self.out, ['static'], status='ok')
        meta = json.loads((self.out / 'run_meta.json').read_text())
        self.assertEqual(meta['status'], 'ok')
        self.assertEqual(meta['phases'], ['static'])
        self.assertEqual(
            meta['inputs'][str(source)],
            '44136fa355b3678a1146ad16f7e8649e94fb4fc21fe77e8310c060f61caaff8a',
        )
