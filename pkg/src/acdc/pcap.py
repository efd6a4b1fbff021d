"""Classic-pcap ingestion: Ethernet/IPv4 frames grouped into labeled flows.

Supports the classic capture format only (magic 0xa1b2c3d4, either byte
order) with Ethernet link type. Non-IPv4 frames and non-TCP/UDP segments
are skipped. Packets are grouped by bidirectional 5-tuple; each flow keeps
its first ``max_packets_per_flow`` snapshots in timestamp order.
"""

from __future__ import annotations

import struct
from pathlib import Path

from .errors import PcapFormatError, PcapParseError
from .flows import FlowKey, FlowRecord, FlowSet, PacketSnapshot, TCP, UDP

__all__ = ["parse_pcap"]

_MAGIC_NATIVE = 0xA1B2C3D4
_MAGIC_SWAPPED = 0xD4C3B2A1
_LINKTYPE_ETHERNET = 1
_ETHERTYPE_IPV4 = 0x0800


def _parse_frame(ts: float, frame: bytes):
    """Dissect one Ethernet frame; return a (key, snapshot) pair or None."""
    if len(frame) < 14:
        return None
    ethertype = int.from_bytes(frame[12:14], "big")
    if ethertype != _ETHERTYPE_IPV4:
        return None
    ip = frame[14:]
    if len(ip) < 20:
        return None
    version = ip[0] >> 4
    ihl = ip[0] & 0x0F
    if version != 4 or ihl < 5 or len(ip) < ihl * 4:
        return None
    ip_header = ip[: ihl * 4]
    total_len = int.from_bytes(ip[2:4], "big")
    proto = ip[9]
    if proto not in (TCP, UDP):
        return None
    transport = ip[ihl * 4 :]
    if proto == TCP:
        if len(transport) < 20:
            return None
        doff = transport[12] >> 4
        if doff < 5 or len(transport) < doff * 4:
            return None
        tp_header = transport[: doff * 4]
    else:
        if len(transport) < 8:
            return None
        tp_header = transport[:8]
    payload_len = max(0, total_len - ihl * 4 - len(tp_header))
    src_ip = ".".join(str(b) for b in ip[12:16])
    dst_ip = ".".join(str(b) for b in ip[16:20])
    src_port = int.from_bytes(tp_header[0:2], "big")
    dst_port = int.from_bytes(tp_header[2:4], "big")
    key = FlowKey(src_ip, dst_ip, src_port, dst_port, proto)
    snap = PacketSnapshot(
        timestamp=ts,
        ip_header=ip_header,
        transport_header=tp_header,
        transport_proto=proto,
        payload_len=payload_len,
    )
    return key, snap


def parse_pcap(
    path: str | Path,
    label: int = 0,
    max_packets_per_flow: int = 4,
    label_name: str | None = None,
) -> FlowSet:
    """Read a capture file into a flow set where every flow gets ``label``.

    Raises PcapFormatError for a bad global header and PcapParseError
    (with the failing byte offset) for a truncated packet record.
    """
    if max_packets_per_flow < 1:
        raise ValueError(f"max_packets_per_flow must be >= 1, got {max_packets_per_flow}")
    data = Path(path).read_bytes()
    if len(data) < 24:
        raise PcapFormatError(f"{path}: file too short for a pcap global header")
    magic = struct.unpack("<I", data[0:4])[0]
    if magic == _MAGIC_NATIVE:
        endian = "<"
    elif magic == _MAGIC_SWAPPED:
        endian = ">"
    else:
        raise PcapFormatError(f"{path}: unrecognized pcap magic 0x{magic:08x}")
    linktype = struct.unpack(endian + "I", data[20:24])[0]
    if linktype != _LINKTYPE_ETHERNET:
        raise PcapFormatError(f"{path}: link type {linktype} is not Ethernet (1)")

    flows: dict[tuple, list] = {}
    first_key: dict[tuple, FlowKey] = {}
    offset = 24
    rec_header = struct.Struct(endian + "IIII")
    while offset < len(data):
        if offset + 16 > len(data):
            raise PcapParseError(f"{path}: truncated record header", offset)
        ts_sec, ts_usec, incl_len, _orig_len = rec_header.unpack_from(data, offset)
        if offset + 16 + incl_len > len(data):
            raise PcapParseError(f"{path}: truncated packet record", offset)
        frame = data[offset + 16 : offset + 16 + incl_len]
        parsed = _parse_frame(ts_sec + ts_usec / 1e6, frame)
        if parsed is not None:
            key, snap = parsed
            canon = key.canonical()
            flows.setdefault(canon, []).append(snap)
            first_key.setdefault(canon, key)
        offset += 16 + incl_len

    records = []
    for canon in flows:
        # Sort fully (not just by time) so assembly is insensitive to the
        # order packets appear in the file, even on timestamp ties.
        snaps = sorted(
            flows[canon],
            key=lambda p: (p.timestamp, p.ip_header, p.transport_header, p.payload_len),
        )
        records.append(
            FlowRecord(
                key=first_key[canon],
                label=label,
                packets=tuple(snaps[:max_packets_per_flow]),
            )
        )
    records.sort(key=lambda r: (r.packets[0].timestamp, r.key))
    return FlowSet(records, {label: label_name if label_name is not None else f"class{label}"})
