# audit/tests/test_traces.py
import re

from django.test import SimpleTestCase

from audit.exceptions import DomainError, ParseError
from audit.traces import (
    TraceEvent,
    TraceKind,
    TraceWindow,
    access_frequency,
    classify_line,
    merge_windows,
    occurrence_histogram,
    parse_trace,
    per_second,
)
from audit.vhal import PropertyId

from .fixtures import CATEGORY_TOKENS, make_workdir, sample_profile, trace_line, write_text

# One independent regex per pattern, used as the oracle for classify_line.
ORACLE = {
    TraceKind.GET_PROPERTY_ID_RETURN: r"CarPropertyValue\.getPropertyId\(\) <= '?(0x[0-9a-fA-F]+|\d+)'?$",
    TraceKind.STUB_PROXY_GET_PROPERTY: r"ICarProperty\$Stub\$Proxy\.getProperty\((0x[0-9a-fA-F]+|\d+),",
    TraceKind.MANAGER_EX_GET_PROPERTY: r"CarPropertyManagerEx\.getProperty\((0x[0-9a-fA-F]+|\d+)\)",
    TraceKind.PROP_ASSIGNMENT: r"\.prop = (0x[0-9a-fA-F]+|\d+)$",
    TraceKind.REGISTER_LISTENER_NOT_IN_CONFIG: r"registerListener: propId is not in config list: (0x[0-9a-fA-F]+|\d+)$",
}
TEMPLATES = {
    TraceKind.GET_PROPERTY_ID_RETURN: "CarPropertyValue.getPropertyId() <= '{id}'",
    TraceKind.STUB_PROXY_GET_PROPERTY: "ICarProperty$Stub$Proxy.getProperty({id}, 0)",
    TraceKind.MANAGER_EX_GET_PROPERTY: "CarPropertyManagerEx.getProperty({id})",
    TraceKind.PROP_ASSIGNMENT: "CarPropertyValue.prop = {id}",
    TraceKind.REGISTER_LISTENER_NOT_IN_CONFIG: "registerListener: propId is not in config list: {id}",
}
NEAR_MISSES = [
    "onTransact(code=12)",
    "CarPropertyValue.getPropertyId()",
    "CarPropertyValue.getPropertyId() <= 'SPEED'",
    "ICarProperty$Stub$Proxy.getPropertyList()",
    "ICarProperty$Stub.getProperty(291504647, 0)",
    "CarPropertyManager.getProperty(0x25400105)",
    "CarPropertyManagerEx.getProperty(areaId)",
    "CarPropertyManagerEx.getPropertyList(0x25400105)",
    "this.prop = value",
    "prop = 0x25400105",
    "prop: 0x25400105",
    "registerListener: propId is in config list: 557846022",
    "registerListener: propId 557846022",
    "registerListener: propId is not in config list: none",
    "getPropertyId() <= 0xZZ",
    ".prop = 0x",
    ".prop = 12abc",
    "CarPropertyManagerEx.getProperty(0x25400105_)",
    "unregisterListener done",
    "ICarProperty$Stub$Proxy.setProperty(291504647, 0)",
]


def oracle(line):
    for kind, pattern in ORACLE.items():
        match = re.search(pattern, line)
        if match:
            raw = match.group(1)
            return kind, int(raw, 16) if raw.startswith('0x') else int(raw)
    return None


class ClassifyLineTest(SimpleTestCase):
    """Test recognition of the five VHAL access patterns"""

    def test_examples(self):
        """Test the documented example lines"""
        self.assertEqual(
            classify_line("CarPropertyManagerEx.getProperty(0x25400105)"),
            (TraceKind.MANAGER_EX_GET_PROPERTY, PropertyId(numeric=0x25400105)),
        )
        self.assertEqual(
            classify_line("registerListener: propId is not in config list: 557846022"),
            (TraceKind.REGISTER_LISTENER_NOT_IN_CONFIG, PropertyId(numeric=557846022)),
        )
        self.assertIsNone(classify_line("onTransact(code=12)"))

    def test_agrees_with_oracle(self):
        """Test a 200-line corpus of matches and near misses against per-pattern regexes"""
        ids = [
            '0x25400105', '0x11600207', '557846022', '291504647', '0x21400A01',
            '7', '0x1', '356517131', '0xabcdef', '1000',
        ]
        broken_ids = ['ZZ', '0x', '-5', '0xG1', 'areaId', '12abc']
        lines = [template.format(id=value) for template in TEMPLATES.values() for value in ids]
        misses = [template.format(id=value) for template in TEMPLATES.values() for value in broken_ids]
        misses += NEAR_MISSES
        corpus = []
        for line in lines + misses:
            corpus.append(line)
            corpus.append(trace_line(len(corpus), line))
        self.assertEqual(len(corpus), 200)
        self.assertGreaterEqual(len(set(misses)), 50)
        negatives = 0
        for line in corpus:
            expected = oracle(line)
            result = classify_line(line)
            if expected is None:
                negatives += 1
                self.assertIsNone(result, line)
            else:
                self.assertEqual((result[0], result[1].numeric), expected, line)
        self.assertEqual(negatives, 2 * len(misses))
        self.assertEqual({kind for line in lines for kind, _ in [oracle(line)]}, set(TraceKind))


class ParseTraceTest(SimpleTestCase):
    """Test reading frida-trace logs into windows"""

    def setUp(self):
        self.workdir = make_workdir(self)

    def test_counts_only_matching_lines(self):
        """Test that 3 matching lines among 10 give 3 events"""
        lines = [
            trace_line(0, "Started tracing 12 functions"),
            trace_line(5, "CarPropertyManagerEx.getProperty(0x25400105)"),
            trace_line(6, "onTransact(code=12)"),
            trace_line(7, "/* TID 0x1a2b */"),
            trace_line(10, "CarPropertyValue.getPropertyId() <= '291504647'"),
            trace_line(11, "CarPropertyValue.getValue()"),
            trace_line(12, "ICarProperty$Stub$Proxy.getPropertyList()"),
            trace_line(20, "CarPropertyValue.prop = 0x11600207"),
            trace_line(21, "done"),
            "Process terminated",
        ]
        path = write_text(self.workdir / 'trace.log', '\n'.join(lines))
        window = parse_trace(path, 'com.example.maps')
        self.assertEqual(len(window.events), 3)
        self.assertEqual([event.timestamp for event in window.events], [5, 10, 20])
        self.assertEqual(window.warnings, [])

    def test_empty_file(self):
        """Test that an empty trace gives an empty window"""
        window = parse_trace(write_text(self.workdir / 'empty.log', ''), 'com.example.maps')
        self.assertEqual(window.events, [])

    def test_out_of_order_lines_sorted_stably(self):
        """Test re-sorting by timestamp keeps file order for ties"""
        lines = [
            trace_line(30, "CarPropertyManagerEx.getProperty(1)"),
            trace_line(10, "CarPropertyManagerEx.getProperty(2)"),
            trace_line(30, "CarPropertyManagerEx.getProperty(3)"),
            trace_line(10, "CarPropertyManagerEx.getProperty(4)"),
        ]
        window = parse_trace(write_text(self.workdir / 'trace.log', '\n'.join(lines)), 'pkg')
        self.assertEqual([event.property.numeric for event in window.events], [2, 4, 1, 3])

    def test_malformed_timestamp_warns(self):
        """Test that a bad timestamp prefix keeps the event with a synthesized time"""
        lines = [
            "CarPropertyManagerEx.getProperty(1)",
            "CarPropertyManagerEx.getProperty(2)",
            "  12x ms  CarPropertyManagerEx.getProperty(3)",
        ]
        window = parse_trace(write_text(self.workdir / 'trace.log', '\n'.join(lines)), 'pkg', spacing_ms=5)
        self.assertEqual([event.timestamp for event in window.events], [0, 5, 10])
        self.assertEqual(len(window.warnings), 1)
        self.assertIn('malformed timestamp', window.warnings[0])

    def test_events_past_window_dropped(self):
        """Test that events after the window end are dropped with a warning"""
        lines = [
            trace_line(1000, "CarPropertyManagerEx.getProperty(1)"),
            trace_line(61000, "CarPropertyManagerEx.getProperty(1)"),
        ]
        window = parse_trace(write_text(self.workdir / 'trace.log', '\n'.join(lines)), 'pkg', window_seconds=60)
        self.assertEqual(len(window.events), 1)
        self.assertIn('dropped', window.warnings[0])

    def test_unreadable_file(self):
        """Test that a missing trace is a parse error"""
        with self.assertRaises(ParseError):
            parse_trace(self.workdir / 'missing.log', 'pkg')


def window_of(package, events, duration=300.0):
    """events: [(ms, numeric id)]"""
    return TraceWindow(package=package, duration=duration, events=[
        TraceEvent(timestamp=ms, package=package, kind=TraceKind.MANAGER_EX_GET_PROPERTY,
                   property=PropertyId(numeric=numeric))
        for ms, numeric in events
    ])


class HistogramTest(SimpleTestCase):
    """Test occurrence histograms and access rates"""

    def test_bucket_sums(self):
        """Test 100 events over 300 s in 10 s buckets"""
        window = window_of('pkg', [(index * 2990, 0x25400105) for index in range(100)])
        histogram = occurrence_histogram(window, sample_profile(), bucket_seconds=10)
        self.assertEqual(len(histogram.buckets), 30)
        self.assertEqual(sum(histogram.buckets), 100)
        self.assertEqual(histogram.total, 100)
        self.assertEqual(histogram.properties, {'VENDOR_GEAR_DISPLAY': 100})
        self.assertEqual(histogram.categories['B'], 100)
        self.assertEqual(sum(count for _, _, count in histogram.timeline), 100)

    def test_single_event(self):
        """Test that one event gives a histogram total of 1"""
        histogram = occurrence_histogram(window_of('pkg', [(0, 1)]))
        self.assertEqual(histogram.total, 1)

    def test_unknown_property_kept(self):
        """Test that properties missing from the catalog stay under their hex ID"""
        histogram = occurrence_histogram(window_of('pkg', [(0, 0x11600207)]), sample_profile())
        self.assertEqual(histogram.properties, {'0x11600207': 1})
        self.assertEqual(histogram.categories['U'], 1)

    def test_engineered_category_totals(self):
        """Test category totals of a trace built to the reference per-category occurrence counts"""
        catalog = {
            f"0x{0x21400000 + index:08x}": {'name': f"{token}_STATE", 'description': f"{token.lower()} state"}
            for index, token in enumerate(CATEGORY_TOKENS)
        }
        counts = (62, 20, 9, 45, 74, 44)
        events = [
            (len(counts) * occurrence + index, 0x21400000 + index)
            for index, count in enumerate(counts)
            for occurrence in range(count)
        ]
        histogram = occurrence_histogram(window_of('com.example.media', events), sample_profile(catalog=catalog), 10)
        self.assertEqual(histogram.categories, dict(zip('ABCDEFU', (*counts, 0))))
        self.assertEqual(histogram.total, 254)
        self.assertEqual(sum(histogram.buckets), 254)

    def test_order_does_not_change_totals(self):
        """Test that histogram totals ignore event order"""
        events = [(index, 1 + index % 3) for index in range(30)]
        forward = occurrence_histogram(window_of('pkg', events))
        backward = occurrence_histogram(window_of('pkg', list(reversed(events))))
        self.assertEqual(forward.properties, backward.properties)

    def test_frequencies(self):
        """Test rates reported to two decimals"""
        self.assertEqual(per_second(6000, 300), 20.00)
        self.assertEqual(per_second(1500, 300), 5.00)
        self.assertEqual(per_second(0, 300), 0.00)
        self.assertEqual(per_second(1, 3), 0.33)
        with self.assertRaises(DomainError):
            per_second(10, 0)

    def test_access_frequency(self):
        """Test the speed rate over a five minute window"""
        window = window_of('pkg', [(index * 50, 0x11600207) for index in range(6000)])
        self.assertEqual(access_frequency(window, PropertyId(numeric=0x11600207)), 20.0)
        self.assertEqual(access_frequency(window, '0x11600207'), 20.0)
        self.assertEqual(access_frequency(window, 'PERF_VEHICLE_SPEED', sample_profile()), 0.0)
        with self.assertRaises(DomainError):
            access_frequency(window_of('pkg', [], duration=0), PropertyId(numeric=1))

    def test_merge_windows(self):
        """Test merging per-package windows into one dynamic document"""
        maps = window_of('com.example.maps', [(0, 0x25400105)] * 1500)
        radio = window_of('com.example.radio', [(0, 0x25400105), (0, 0x11600207)])
        document, combined, rows, warnings = merge_windows([maps, radio], sample_profile(), bucket_seconds=10)
        self.assertEqual(document['com.example.maps'], {'VENDOR_GEAR_DISPLAY': 1500})
        self.assertEqual(document['com.example.radio'], {'0x11600207': 1, 'VENDOR_GEAR_DISPLAY': 1})
        self.assertEqual(document['categories']['B'], 1501)
        self.assertEqual(document['frequency']['VENDOR_GEAR_DISPLAY'], 5.0)
        self.assertEqual(combined.total, 1502)
        self.assertEqual(rows, [(0.0, '0x11600207', 1), (0.0, 'VENDOR_GEAR_DISPLAY', 1501)])
        self.assertEqual(warnings, [])
