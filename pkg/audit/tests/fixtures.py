# audit/tests/fixtures.py
"""Inputs built on the fly for the test modules."""
import json
import shutil
import socket
import struct
import tempfile
from pathlib import Path

from audit.catalogs import load_lexicon, profile_from_mapping

CATALOG = {
    'HVAC_FAN_SPEED': 'Fan speed setting',
    'HVAC_TEMPERATURE_SET': 'Cabin temperature target',
    'SEAT_BELT_BUCKLED': 'Seat belt buckled state',
    'PERF_VEHICLE_SPEED': 'Current vehicle speed',
    'EV_BATTERY_LEVEL': 'Battery level',
    'HEADLIGHTS_STATE': 'Headlight state',
    'INFO_VIN': 'Vehicle identification number',
    'USER_PROFILE_LANGUAGE': 'Display language of the active profile',
    '0x25400105': {'name': 'VENDOR_GEAR_DISPLAY', 'description': 'Gear shown on the cluster'},
}
PERMISSIONS = [
    'android.car.permission.CAR_SPEED',
    'android.car.permission.CONTROL_CAR_CLIMATE',
    'android.car.permission.CAR_ENERGY',
]


def make_workdir(testcase):
    path = Path(tempfile.mkdtemp(prefix='vhalaudit-'))
    testcase.addCleanup(shutil.rmtree, path, ignore_errors=True)
    return path


def write_json(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2), encoding='utf-8')
    return path


def write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding='utf-8')
    return path


def sample_profile(label='OEM-A', catalog=None, permissions=PERMISSIONS):
    return profile_from_mapping(catalog or CATALOG, label, load_lexicon(), permissions)


def named_profile(label, names):
    return profile_from_mapping({name: f"{name.lower()} description" for name in names}, label, load_lexicon())


# one lexicon token per category, A..F
CATEGORY_TOKENS = ('USER', 'LANE', 'BATTERY', 'LAMP', 'TPMS', 'HVAC')


def distribution_catalog(counts):
    """Catalog with counts[i] properties in category A..F, e.g. HVAC_0 .. HVAC_n for F."""
    return {
        f"{token}_{index}": f"{token.lower()} property {index}"
        for token, count in zip(CATEGORY_TOKENS, counts)
        for index in range(count)
    }


# ---------- Source trees ----------

MAPS_SOURCE = """\
package com.example.maps;

import android.car.VehiclePropertyIds;

public class SpeedReader {
    int speed = mgr.getIntProperty(VehiclePropertyIds.PERF_VEHICLE_SPEED, 0);
    int again = mgr.getIntProperty(VehiclePropertyIds.PERF_VEHICLE_SPEED, 0);
    int gear = mgr.getIntProperty(0x25400105, 0);
    String note = "PERF_VEHICLE_SPEED_RAW is not a catalog name";
}
"""
MAPS_MANIFEST = """\
<manifest package="com.example.maps">
    <uses-permission android:name="android.car.permission.CAR_SPEED"/>
    <uses-permission android:name="android.car.permission.CAR_SPEED_EXTRA"/>
</manifest>
"""
CLIMATE_SOURCE = """\
package com.example.climate;

class Hvac {
    void apply() {
        set(HVAC_FAN_SPEED, 3);
        set(HVAC_TEMPERATURE_SET, 21);
        int raw = 624951557;
        read(SEAT_BELT_BUCKLED);
        String permission = "android.car.permission.CONTROL_CAR_CLIMATE";
    }
}
"""


def make_source_root(base):
    root = Path(base) / 'apks'
    write_text(root / 'com.example.maps' / 'src' / 'SpeedReader.java', MAPS_SOURCE)
    write_text(root / 'com.example.maps' / 'AndroidManifest.xml', MAPS_MANIFEST)
    write_text(root / 'com.example.climate' / 'smali' / 'Hvac.java', CLIMATE_SOURCE)
    write_text(root / 'com.example.climate' / 'res' / 'logo.png', 'PERF_VEHICLE_SPEED')
    (root / 'com.example.empty').mkdir(parents=True)
    return root


# ---------- Traces ----------

def trace_line(ms, body):
    return f"{ms:6d} ms  {body}"


# ---------- Captures ----------

def pcap_header(linktype=1, magic=0xa1b2c3d4):
    return struct.pack('<IHHiIII', magic, 2, 4, 0, 0, 65535, linktype)


def _ethernet(ethertype):
    return struct.pack('!6s6sH', b'\x02\x00\x00\x00\x00\x01', b'\x02\x00\x00\x00\x00\x02', ethertype)


def _ipv4(src, dst, proto, body_len):
    return struct.pack(
        '!BBHHHBBH4s4s', 0x45, 0, 20 + body_len, 0, 0, 64, proto, 0,
        socket.inet_aton(src), socket.inet_aton(dst),
    )


def tcp_frame(src, sport, dst, dport, payload_len):
    tcp = struct.pack('!HHIIBBHHH', sport, dport, 1, 0, 0x50, 0x18, 65535, 0, 0)
    payload = b'\x17' * payload_len
    return _ethernet(0x0800) + _ipv4(src, dst, 6, len(tcp) + payload_len) + tcp + payload


def udp_frame(src, sport, dst, dport, payload_len):
    udp = struct.pack('!HHHH', sport, dport, 8 + payload_len, 0)
    return _ethernet(0x0800) + _ipv4(src, dst, 17, 8 + payload_len) + udp + b'\x00' * payload_len


def arp_frame():
    body = struct.pack(
        '!HHBBH6s4s6s4s', 1, 0x0800, 6, 4, 1,
        b'\x02\x00\x00\x00\x00\x02', socket.inet_aton('10.0.2.15'),
        b'\x00' * 6, socket.inet_aton('10.0.2.2'),
    )
    return _ethernet(0x0806) + body


def pcap_record(ts, frame, caplen=None):
    sec = int(ts)
    usec = int(round((ts - sec) * 1_000_000))
    caplen = len(frame) if caplen is None else caplen
    return struct.pack('<IIII', sec, usec, caplen, caplen) + frame


def write_pcap(path, records, header=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes((header if header is not None else pcap_header()) + b''.join(records))
    return path
