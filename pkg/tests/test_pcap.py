"""Capture-file parsing against hand-built pcap bytes."""

import random
import struct

import pytest

import acdc
from acdc.errors import PcapFormatError, PcapParseError
from acdc.flows import TCP, UDP
from acdc.synthetic import _ipv4_header, _tcp_header, _udp_header


def _ip(dotted):
    return bytes(int(p) for p in dotted.split("."))


def eth_ipv4_frame(sip, dip, sport, dport, proto=TCP, payload_len=100, ttl=64,
                   options=b"", pad=0):
    if proto == TCP:
        tp = _tcp_header(sport, dport, 1, 2, 0x18, 8192, 0, options)
    else:
        tp = _udp_header(sport, dport, 8 + payload_len, 0)
    ip = _ipv4_header(0, 20 + len(tp) + payload_len, 1, True, ttl, proto, _ip(sip), _ip(dip))
    eth = b"\xaa" * 6 + b"\xbb" * 6 + b"\x08\x00"
    return eth + ip + tp + b"\x00" * payload_len + b"\x00" * pad


def arp_frame():
    return b"\xaa" * 6 + b"\xbb" * 6 + b"\x08\x06" + b"\x00" * 28


def build_pcap(frames_with_ts, swapped=False, linktype=1):
    endian = ">" if swapped else "<"
    magic = 0xA1B2C3D4
    out = struct.pack(endian + "IHHiIII", magic, 2, 4, 0, 0, 65535, linktype)
    for ts, frame in frames_with_ts:
        sec = int(ts)
        usec = int(round((ts - sec) * 1e6))
        out += struct.pack(endian + "IIII", sec, usec, len(frame), len(frame))
        out += frame
    return out


@pytest.fixture
def six_packet_capture(tmp_path):
    frames = []
    for i in range(6):
        if i % 2 == 0:
            f = eth_ipv4_frame("10.0.0.1", "10.0.0.2", 40000, 443)
        else:
            f = eth_ipv4_frame("10.0.0.2", "10.0.0.1", 443, 40000)  # reverse direction
        frames.append((1.0 + 0.1 * i, f))
    path = tmp_path / "one.pcap"
    path.write_bytes(build_pcap(frames))
    return path


def test_single_connection_grouping(six_packet_capture):
    fs = acdc.parse_pcap(six_packet_capture, label=0, max_packets_per_flow=4)
    assert len(fs) == 1
    flow = fs.flows[0]
    assert len(flow.packets) == 4
    assert [round(p.timestamp, 1) for p in flow.packets] == [1.0, 1.1, 1.2, 1.3]
    assert flow.key.proto == TCP


def test_two_interleaved_flows(tmp_path):
    f1 = eth_ipv4_frame("10.0.0.1", "10.0.0.2", 40000, 443)
    f2 = eth_ipv4_frame("10.0.0.3", "10.0.0.4", 50000, 53, proto=UDP, payload_len=40)
    frames = [(1.0, f1), (1.05, f2), (1.1, f1), (1.15, f2)]
    path = tmp_path / "two.pcap"
    path.write_bytes(build_pcap(frames))
    fs = acdc.parse_pcap(path, label=2)
    assert len(fs) == 2
    assert sorted(len(f.packets) for f in fs.flows) == [2, 2]
    assert all(f.label == 2 for f in fs.flows)


def test_arp_frame_skipped(tmp_path):
    frames = [(1.0, eth_ipv4_frame("10.0.0.1", "10.0.0.2", 40000, 443)), (1.1, arp_frame())]
    path = tmp_path / "arp.pcap"
    path.write_bytes(build_pcap(frames))
    fs = acdc.parse_pcap(path)
    assert len(fs) == 1
    assert len(fs.flows[0].packets) == 1


def test_byte_swapped_magic(tmp_path):
    frames = [(2.5, eth_ipv4_frame("10.0.0.1", "10.0.0.2", 1234, 80))]
    path = tmp_path / "be.pcap"
    path.write_bytes(build_pcap(frames, swapped=True))
    fs = acdc.parse_pcap(path)
    assert len(fs) == 1
    assert fs.flows[0].packets[0].timestamp == pytest.approx(2.5)


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.pcap"
    path.write_bytes(b"\x00\x01\x02\x03" + b"\x00" * 20)
    with pytest.raises(PcapFormatError):
        acdc.parse_pcap(path)


def test_non_ethernet_linktype(tmp_path):
    path = tmp_path / "raw.pcap"
    path.write_bytes(build_pcap([], linktype=101))
    with pytest.raises(PcapFormatError):
        acdc.parse_pcap(path)


def test_truncated_record_names_offset(tmp_path):
    frame = eth_ipv4_frame("10.0.0.1", "10.0.0.2", 40000, 443)
    data = build_pcap([(1.0, frame)])
    path = tmp_path / "trunc.pcap"
    path.write_bytes(data[:-10])
    with pytest.raises(PcapParseError) as exc:
        acdc.parse_pcap(path)
    assert exc.value.offset == 24
    assert "byte offset 24" in str(exc.value)


def test_bidirectional_packets_share_flow(six_packet_capture):
    fs = acdc.parse_pcap(six_packet_capture, max_packets_per_flow=10)
    assert len(fs) == 1
    flow = fs.flows[0]
    # first-seen orientation
    assert flow.key.src_ip == "10.0.0.1" and flow.key.dst_port == 443
    sports = {int.from_bytes(p.transport_header[0:2], "big") for p in flow.packets}
    assert sports == {40000, 443}


def test_payload_len_ignores_ethernet_padding(tmp_path):
    frame = eth_ipv4_frame("10.0.0.1", "10.0.0.2", 40000, 443, payload_len=3, pad=20)
    path = tmp_path / "pad.pcap"
    path.write_bytes(build_pcap([(1.0, frame)]))
    fs = acdc.parse_pcap(path)
    assert fs.flows[0].packets[0].payload_len == 3


def test_assembly_order_insensitive(tmp_path):
    frames = []
    for i in range(8):
        sip, dip = ("10.0.0.1", "10.0.0.2") if i % 2 == 0 else ("10.0.0.2", "10.0.0.1")
        sport, dport = (40000, 443) if i % 2 == 0 else (443, 40000)
        frames.append((1.0 + 0.01 * i, eth_ipv4_frame(sip, dip, sport, dport, payload_len=10 + i)))
    shuffled = frames[:]
    random.Random(3).shuffle(shuffled)
    p1 = tmp_path / "ordered.pcap"
    p2 = tmp_path / "shuffled.pcap"
    p1.write_bytes(build_pcap(frames))
    p2.write_bytes(build_pcap(shuffled))
    fs1 = acdc.parse_pcap(p1, max_packets_per_flow=8)
    fs2 = acdc.parse_pcap(p2, max_packets_per_flow=8)
    assert len(fs1) == len(fs2) == 1
    assert fs1.flows[0].packets == fs2.flows[0].packets


def test_tcp_options_captured(tmp_path):
    options = bytes([2, 4, 5, 180])
    frame = eth_ipv4_frame("10.0.0.1", "10.0.0.2", 40000, 443, options=options)
    path = tmp_path / "opt.pcap"
    path.write_bytes(build_pcap([(1.0, frame)]))
    fs = acdc.parse_pcap(path)
    tp = fs.flows[0].packets[0].transport_header
    assert len(tp) == 24
    assert tp[20:24] == options
