"""Shared fixtures: packet builders, reference tables, and small flow sets."""

from pathlib import Path

import pytest

import acdc
from acdc.flows import TCP, UDP, FlowKey, FlowRecord, PacketSnapshot
from acdc.synthetic import _ipv4_header, _tcp_header, _udp_header

DATA_DIR = Path(__file__).parent / "data"

# Frozen importance/bit reference used by the golden ranking and subset
# tests: dotted field name -> (bits, importance).
REFERENCE_IMPORTANCE_TABLE = {
    "ipv4.dfbit": (1, 0.048111),
    "tcp.fin": (1, 0.017778),
    "ipv4.ttl": (8, 0.121000),
    "tcp.doff": (4, 0.032667),
    "tcp.ackf": (1, 0.008111),
    "tcp.wsize": (16, 0.028556),
    "tcp.psh": (1, 0.001333),
    "ipv4.cksum": (16, 0.009889),
    "udp.len": (16, 0.007778),
    "tcp.cksum": (16, 0.007000),
    "ipv4.tl": (8, 0.003444),
    "tcp.opt": (320, 0.107000),
    "udp.cksum": (16, 0.005222),
    "ipv4.tos": (8, 0.002333),
    "ipv4.proto": (8, 0.002222),
    "tcp.rst": (1, 0.000111),
    "tcp.seq": (32, 0.001444),
    "tcp.ackn": (32, 0.000333),
}

# The importance-per-bit ordering those numbers induce.
REFERENCE_RANKING = [
    "ipv4.dfbit",
    "tcp.fin",
    "ipv4.ttl",
    "tcp.doff",
    "tcp.ackf",
    "tcp.wsize",
    "tcp.psh",
    "ipv4.cksum",
    "udp.len",
    "tcp.cksum",
    "ipv4.tl",
    "tcp.opt",
    "udp.cksum",
    "ipv4.tos",
    "ipv4.proto",
    "tcp.rst",
    "tcp.seq",
    "tcp.ackn",
]


def _ip_bytes(dotted: str) -> bytes:
    return bytes(int(p) for p in dotted.split("."))


def make_tcp_snapshot(
    ts=0.0,
    ttl=64,
    tos=0,
    df=True,
    ip_id=7,
    sip="10.0.0.1",
    dip="10.0.0.2",
    sport=40000,
    dport=443,
    seq=1000,
    ackn=2000,
    flags=0x18,
    wsize=29200,
    tcp_cksum=0xBEEF,
    options=b"",
    payload=100,
):
    tp = _tcp_header(sport, dport, seq, ackn, flags, wsize, tcp_cksum, options)
    ip = _ipv4_header(tos, 20 + len(tp) + payload, ip_id, df, ttl, TCP, _ip_bytes(sip), _ip_bytes(dip))
    return PacketSnapshot(ts, ip, tp, TCP, payload)


def make_udp_snapshot(
    ts=0.0,
    ttl=64,
    tos=0,
    df=False,
    ip_id=9,
    sip="10.0.0.1",
    dip="10.0.0.2",
    sport=50000,
    dport=53,
    udp_cksum=0x1234,
    payload=80,
):
    tp = _udp_header(sport, dport, 8 + payload, udp_cksum)
    ip = _ipv4_header(tos, 20 + 8 + payload, ip_id, df, ttl, UDP, _ip_bytes(sip), _ip_bytes(dip))
    return PacketSnapshot(ts, ip, tp, UDP, payload)


def make_flow(packets, label=0, key=None):
    """Build a flow whose key is derived from the first packet."""
    if key is None:
        p = packets[0]
        sip = ".".join(str(b) for b in p.ip_header[12:16])
        dip = ".".join(str(b) for b in p.ip_header[16:20])
        sport = int.from_bytes(p.transport_header[0:2], "big")
        dport = int.from_bytes(p.transport_header[2:4], "big")
        key = FlowKey(sip, dip, sport, dport, p.transport_proto)
    return FlowRecord(key, label, tuple(packets))


@pytest.fixture(scope="session")
def registry():
    return acdc.field_registry()


@pytest.fixture(scope="session")
def reference_importances(registry):
    """Importance mapping (field id -> FI) for the frozen reference table."""
    return {
        registry.by_dotted(name).id: fi
        for name, (_bits, fi) in REFERENCE_IMPORTANCE_TABLE.items()
    }


@pytest.fixture(scope="session")
def reference_profile():
    """15-entry fixture profile table at batch size 500."""
    return acdc.read_profile_csv(DATA_DIR / "pool_profile_b500.csv")


@pytest.fixture(scope="session")
def flowset4():
    """4-class synthetic set, 50 flows per class."""
    return acdc.generate_synthetic(acdc.default_generator_config(4, 50), seed=7)


@pytest.fixture(scope="session")
def separable_ttl_config():
    """Two classes that differ only in disjoint TTL values."""
    base = {
        "flows": 60,
        "handshake_prob": 0.5,
        "wsize": {"low": 20000, "high": 30000},
        "payload_size": {"low": 200, "high": 1200},
    }
    return {
        "classes": [
            dict(base, name="ttl64", ttl={"values": [64]}),
            dict(base, name="ttl128", ttl={"values": [128]}),
        ]
    }
