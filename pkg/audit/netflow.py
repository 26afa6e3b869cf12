# audit/netflow.py
"""Network evidence: pcap decoding, decrypted-flow exports, ps/netstat
attribution, per-app payload, destination classification and request
detectors.
"""
import ipaddress
import json
import logging
import struct
from bisect import bisect_right
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd
from django.conf import settings
from scapy.layers.inet import IP, TCP, UDP
from scapy.layers.inet6 import IPv6
from scapy.layers.l2 import Ether
from scapy.utils import RawPcapReader

from .artifacts import load_validated
from .exceptions import FormatError, ParseError
from .serializers import DestinationSerializer, DetectorSerializer, HttpsFlowSerializer, flatten_errors

logger = logging.getLogger(__name__)

PCAP_MAGICS = {b'\xa1\xb2\xc3\xd4': '>', b'\xd4\xc3\xb2\xa1': '<'}
PCAP_GLOBAL_HEADER = 24
PCAP_RECORD_HEADER = 16
LINKTYPE_ETHERNET = 1
UNKNOWN_PACKAGE = 'unknown'
UNCLASSIFIED = 'unclassified'
PROTOBUF_CONTENT_TYPES = ('protobuf', 'grpc')


@dataclass(frozen=True)
class PacketRecord:
    ts: float
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    proto: str  # TCP | UDP | OTHER
    payload_len: int

    def socket_keys(self):
        """Both orientations of the connection key."""
        src, dst = f"{self.src_ip}:{self.src_port}", f"{self.dst_ip}:{self.dst_port}"
        return (self.proto, src, dst), (self.proto, dst, src)

    @property
    def remote_ip(self):
        dst, src = ipaddress.ip_address(self.dst_ip), ipaddress.ip_address(self.src_ip)
        if dst.is_private and not src.is_private:
            return self.src_ip
        return self.dst_ip


@dataclass(frozen=True)
class HttpsFlowRecord:
    index: int
    ts: float
    host: str
    method: str
    url: str
    status: int | None = None
    request_headers: tuple = ()
    response_headers: tuple = ()
    request_size: int = 0
    response_size: int = 0
    body_excerpt: str | None = None
    client: str | None = None
    server: str | None = None

    @property
    def payload_len(self):
        return self.request_size + self.response_size

    def socket_keys(self):
        if not (self.client and self.server):
            return ()
        return ('TCP', self.client, self.server), ('TCP', self.server, self.client)

    @property
    def remote_ip(self):
        if self.server:
            return self.server.rsplit(':', 1)[0].strip('[]')
        return None

    def header(self, name):
        name = name.lower()
        for key, value in self.request_headers + self.response_headers:
            if key.lower() == name:
                return value
        return None


@dataclass(frozen=True)
class ProcessSnapshot:
    ts: float
    entries: dict  # pid -> package


@dataclass(frozen=True)
class SocketSnapshot:
    ts: float
    entries: dict  # (proto, local, remote) -> pid


@dataclass
class CaptureResult:
    records: list = field(default_factory=list)
    skipped: int = 0
    warnings: list = field(default_factory=list)


# ---------- PCAP ----------

def _check_header(path):
    try:
        with open(path, 'rb') as handle:
            header = handle.read(24)
    except OSError as exc:
        raise ParseError(f"cannot read capture {path}: {exc.strerror}")
    if len(header) < 24 or header[:4] not in PCAP_MAGICS:
        raise FormatError(f"{path} is not a libpcap capture (bad magic)")
    linktype = struct.unpack(PCAP_MAGICS[header[:4]] + 'I', header[20:24])[0]
    if linktype != LINKTYPE_ETHERNET:
        raise FormatError(f"{path}: link type {linktype} is not Ethernet")


def _transport(ip_layer, proto_number, header_len, total_len):
    """(proto, sport, dport, payload_len) from the IP payload layer."""
    if proto_number == 6 and ip_layer.haslayer(TCP):
        tcp = ip_layer[TCP]
        return 'TCP', tcp.sport, tcp.dport, max(0, total_len - header_len - tcp.dataofs * 4)
    if proto_number == 17 and ip_layer.haslayer(UDP):
        udp = ip_layer[UDP]
        return 'UDP', udp.sport, udp.dport, max(0, udp.len - 8)
    return 'OTHER', 0, 0, max(0, total_len - header_len)


def dissect_frame(data, ts):
    """One Ethernet frame -> PacketRecord, or None for non-IP frames."""
    frame = Ether(data)
    if frame.haslayer(IP):
        ip = frame[IP]
        proto, sport, dport, payload = _transport(ip, ip.proto, ip.ihl * 4, ip.len)
    elif frame.haslayer(IPv6):
        ip = frame[IPv6]
        # plen covers everything after the fixed 40-byte header
        proto, sport, dport, payload = _transport(ip, ip.nh, 40, ip.plen + 40)
    else:
        return None
    return PacketRecord(
        ts=ts, src_ip=ip.src, dst_ip=ip.dst, src_port=int(sport), dst_port=int(dport),
        proto=proto, payload_len=int(payload),
    )


def _truncated(result, path, what):
    message = f"{path.name}: truncated {what} after {len(result.records) + result.skipped} packets"
    logger.warning(message)
    result.warnings.append(message)


def parse_pcap(path):
    """Capture-ordered packet records; truncated captures return what was read."""
    path = Path(path)
    _check_header(path)
    result = CaptureResult()
    size = path.stat().st_size
    consumed = PCAP_GLOBAL_HEADER
    reader = RawPcapReader(str(path))
    try:
        for data, meta in reader:
            consumed += PCAP_RECORD_HEADER + len(data)
            if len(data) < meta.caplen:
                _truncated(result, path, 'packet')
                break
            record = dissect_frame(data, meta.sec + meta.usec / 1_000_000)
            if record is None:
                result.skipped += 1
                continue
            result.records.append(record)
        else:
            # the reader stops silently on a short record header
            if consumed < size:
                _truncated(result, path, 'record header')
    finally:
        reader.close()
    if result.skipped:
        result.warnings.append(f"{path.name}: {result.skipped} non-IP frames skipped")
    logger.info("pcap %s: %d records, %d skipped", path.name, len(result.records), result.skipped)
    return result


# ---------- Flow exports ----------

def parse_flows(path):
    """flows.jsonl -> HttpsFlowRecord list, in file order."""
    path = Path(path)
    try:
        lines = path.read_text(encoding='utf-8').splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read flows {path}: {exc.strerror}")
    flows = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path.name}:{number}: invalid JSON ({exc.msg})")
        serializer = HttpsFlowSerializer(data=data)
        if not serializer.is_valid():
            raise ParseError(f"{path.name}:{number}: " + "; ".join(flatten_errors(serializer.errors)))
        flow = serializer.validated_data
        flows.append(HttpsFlowRecord(
            index=len(flows),
            ts=flow['ts'],
            host=flow['host'],
            method=flow['method'],
            url=flow['url'],
            status=flow['status'],
            request_headers=flow['req_headers'],
            response_headers=flow['resp_headers'],
            request_size=flow['req_size'],
            response_size=flow['resp_size'],
            body_excerpt=flow['body_excerpt'],
            client=flow['client'],
            server=flow['server'],
        ))
    return flows


# ---------- Process / socket snapshots ----------

def _snapshot_lines(path, width):
    path = Path(path)
    try:
        lines = path.read_text(encoding='utf-8').splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read snapshot log {path}: {exc.strerror}")
    for number, line in enumerate(lines, start=1):
        if not line.strip() or line.lstrip().startswith('#'):
            continue
        parts = line.split()
        if len(parts) != width:
            raise ParseError(f"{path.name}:{number}: expected {width} columns, got {len(parts)}")
        try:
            ts = float(parts[0])
        except ValueError:
            raise ParseError(f"{path.name}:{number}: bad timestamp {parts[0]!r}")
        yield number, ts, parts[1:]


def _group(rows, path):
    snapshots = defaultdict(dict)
    for number, ts, key, value in rows:
        entries = snapshots[ts]
        if entries.get(key, value) != value:
            raise ParseError(f"{Path(path).name}:{number}: {key} listed twice in snapshot {ts:g}")
        entries[key] = value
    return snapshots


def parse_ps(path):
    """`<ts> <pid> <package>` lines -> ProcessSnapshot list by time."""
    rows = []
    for number, ts, (pid, package) in _snapshot_lines(path, 3):
        if not pid.isdigit():
            raise ParseError(f"{Path(path).name}:{number}: bad pid {pid!r}")
        rows.append((number, ts, int(pid), package))
    return [ProcessSnapshot(ts=ts, entries=entries) for ts, entries in sorted(_group(rows, path).items())]


def parse_netstat(path):
    """`<ts> <proto> <local> <remote> <pid>` lines -> SocketSnapshot list by time."""
    rows = []
    for number, ts, (proto, local, remote, pid) in _snapshot_lines(path, 5):
        if not pid.isdigit():
            raise ParseError(f"{Path(path).name}:{number}: bad pid {pid!r}")
        rows.append((number, ts, (proto.upper().rstrip('6'), local, remote), int(pid)))
    return [SocketSnapshot(ts=ts, entries=entries) for ts, entries in sorted(_group(rows, path).items())]


# ---------- Attribution ----------

def _nearest(snapshots, ts, key):
    """Value for `key` at the latest snapshot with ts <= record ts, else the closest one."""
    holders = [snapshot for snapshot in snapshots if key in snapshot.entries]
    if not holders:
        return None
    times = [snapshot.ts for snapshot in holders]
    position = bisect_right(times, ts)
    if position:
        return holders[position - 1].entries[key]
    return holders[0].entries[key]


def attribute(record, sockets, procs):
    """Package owning a packet or flow record, or "unknown"."""
    for key in record.socket_keys():
        pid = _nearest(sockets, record.ts, key)
        if pid is not None:
            package = _nearest(procs, record.ts, pid)
            return package if package is not None else UNKNOWN_PACKAGE
    return UNKNOWN_PACKAGE


def correlate(records, sockets, procs):
    """[(package, record)] for every record, in input order."""
    sockets = sorted(sockets, key=lambda snapshot: snapshot.ts)
    procs = sorted(procs, key=lambda snapshot: snapshot.ts)
    return [(attribute(record, sockets, procs), record) for record in records]


def per_app_payload(attributed):
    """package -> total payload bytes, largest first (ties by name)."""
    totals = Counter()
    for package, record in attributed:
        totals[package] += record.payload_len
    return dict(sorted(totals.items(), key=lambda item: (-item[1], item[0])))


def within_window(records, window_seconds, start=None):
    """(kept, dropped) split of records by offset from the window start, inclusive of the end."""
    if not records:
        return [], []
    start = min(record.ts for record in records) if start is None else start
    kept, dropped = [], []
    for record in records:
        (kept if record.ts - start <= window_seconds else dropped).append(record)
    return kept, dropped


def payload_series(attributed, bin_seconds=60):
    """(package, minute, bytes) rows, bins counted from the first record."""
    if not attributed:
        return []
    frame = pd.DataFrame(
        [(package, record.ts, record.payload_len) for package, record in attributed],
        columns=['package', 'ts', 'bytes'],
    )
    frame['bin'] = ((frame['ts'] - frame['ts'].min()) // bin_seconds).astype(int)
    grouped = frame.groupby(['package', 'bin'])['bytes'].sum().reset_index()
    return [(row.package, int(row.bin), int(row.bytes)) for row in grouped.itertuples(index=False)]


# ---------- Destinations ----------

@dataclass(frozen=True)
class DestinationMap:
    entries: tuple = ()  # (ip_network, org)

    @classmethod
    def load(cls, path=None):
        path = path or settings.AUDITOR['DESTINATIONS_FILE']
        data = load_validated(path, DestinationSerializer, field='dest_map', many=True)
        return cls(entries=tuple((entry['cidr'], entry['org']) for entry in data))

    def classify(self, ip):
        address = ipaddress.ip_address(ip)
        best = None
        for network, org in self.entries:
            if network.version == address.version and address in network:
                if best is None or network.prefixlen > best[0].prefixlen:
                    best = (network, org)
        return best[1] if best else UNCLASSIFIED


def classify_destination(ip, destination_map):
    return destination_map.classify(ip)


def destination_breakdown(attributed, destination_map):
    """organization -> bytes, largest first; records without a remote address are unclassified."""
    totals = Counter()
    for _, record in attributed:
        remote = record.remote_ip
        totals[destination_map.classify(remote) if remote else UNCLASSIFIED] += record.payload_len
    return dict(sorted(totals.items(), key=lambda item: (-item[1], item[0])))


# ---------- Request inspection ----------

@dataclass(frozen=True)
class Detector:
    id: str
    pattern: object  # compiled regex
    targets: frozenset


def load_detectors(path=None):
    path = path or settings.AUDITOR['DETECTORS_FILE']
    data = load_validated(path, DetectorSerializer, field='detectors', many=True)
    return [Detector(id=entry['id'], pattern=entry['compiled'], targets=frozenset(entry['targets'])) for entry in data]


def _flow_fields(flow):
    headers = '\n'.join(f"{name}: {value}" for name, value in flow.request_headers)
    return (
        ('method', flow.method),
        ('url', flow.url),
        ('headers', headers),
        ('body', flow.body_excerpt or ''),
    )


def inspect_requests(flows, detectors):
    """Every detector hit as {flow, detector, field, excerpt}, in flow order."""
    findings = []
    for flow in flows:
        for name, text in _flow_fields(flow):
            if not text:
                continue
            for detector in detectors:
                if name not in detector.targets:
                    continue
                for match in detector.pattern.finditer(text):
                    findings.append({
                        'flow': flow.index,
                        'host': flow.host,
                        'detector': detector.id,
                        'field': name,
                        'excerpt': match.group()[:200],
                    })
    return findings


def _looks_like_protobuf_wire(text):
    """First byte is a plausible field key and the excerpt is mostly binary."""
    raw = text.encode('latin-1', errors='ignore')
    if not raw:
        return False
    key = raw[0]
    if key >> 3 == 0 or key & 0x07 not in (0, 1, 2, 5):
        return False
    printable = sum(1 for byte in raw if 32 <= byte < 127 or byte in (9, 10, 13))
    return printable / len(raw) < 0.7


def protobuf_suspected(flow):
    content_type = (flow.header('content-type') or '').lower()
    if any(marker in content_type for marker in PROTOBUF_CONTENT_TYPES):
        return True
    return bool(flow.body_excerpt) and _looks_like_protobuf_wire(flow.body_excerpt)


# ---------- Phase ----------

def analyze_network(pcaps=(), flows_path=None, ps_path=None, netstat_path=None,
                    destination_map=None, detectors=None, bin_seconds=60, window_seconds=None):
    """Run every network step; returns (network document, payload rows, series rows).

    Payload totals cover the recording window, counted from the earliest packet
    or flow; traffic after it is reported as outside_window_bytes.
    """
    if window_seconds is None:
        window_seconds = settings.AUDITOR['WINDOW_SECONDS']
    procs = parse_ps(ps_path)
    sockets = parse_netstat(netstat_path)
    destination_map = destination_map or DestinationMap()
    detectors = detectors if detectors is not None else []

    packets, skipped, warnings = [], 0, []
    for pcap in pcaps:
        capture = parse_pcap(pcap)
        packets.extend(capture.records)
        skipped += capture.skipped
        warnings.extend(capture.warnings)
    flows = parse_flows(flows_path) if flows_path else []

    start = min(record.ts for record in [*packets, *flows]) if packets or flows else None
    packets, late_packets = within_window(packets, window_seconds, start)
    windowed_flows, late_flows = within_window(flows, window_seconds, start)
    outside = sum(record.payload_len for record in late_packets + late_flows)
    if outside:
        warnings.append(
            f"{outside} payload bytes after the {window_seconds:g} s window excluded "
            f"({len(late_packets)} packets, {len(late_flows)} flows)"
        )

    attributed_packets = correlate(packets, sockets, procs)
    # flows without socket endpoints still count, under "unknown"
    attributed_flows = correlate(windowed_flows, sockets, procs)
    payload = per_app_payload(attributed_packets)
    unknown = payload.get(UNKNOWN_PACKAGE, 0)
    if packets and unknown:
        warnings.append(f"{unknown} payload bytes could not be attributed to a package")

    findings = inspect_requests(flows, detectors)
    protobuf = [flow.index for flow in flows if protobuf_suspected(flow)]
    document = {
        'per_app': payload,
        'https_per_app': per_app_payload(attributed_flows),
        'destinations': destination_breakdown(attributed_packets, destination_map),
        'https_destinations': destination_breakdown(attributed_flows, destination_map),
        'findings': findings,
        'protobuf_suspected': protobuf,
        'packets': len(packets),
        'skipped_frames': skipped,
        'flows': len(flows),
        'total_bytes': sum(record.payload_len for record in packets),
        'https_total_bytes': sum(flow.payload_len for flow in windowed_flows),
        'outside_window_bytes': outside,
        'window_seconds': window_seconds,
        'warnings': warnings,
    }
    logger.info(
        "network: %d packets, %d flows, %d apps, %d findings",
        len(packets), len(flows), len(payload), len(findings),
    )
    return document, list(payload.items()), payload_series(attributed_packets, bin_seconds)
