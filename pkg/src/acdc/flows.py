"""Flow-level data model: packet snapshots, labeled flows, and splits.

A :class:`FlowRecord` keeps the raw header bytes of the first few packets
of one 5-tuple flow; that is all the downstream encoder needs. Flows are
bidirectional: request and response packets share a record.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError

__all__ = [
    "TCP",
    "UDP",
    "PacketSnapshot",
    "FlowKey",
    "FlowRecord",
    "FlowSet",
    "split_train_test",
    "save_flowset",
    "load_flowset",
]

TCP = 6
UDP = 17

FLOWSET_FORMAT = "acdc-flowset/1"


@dataclass(frozen=True)
class PacketSnapshot:
    """Raw headers of one captured packet.

    ``ip_header`` and ``transport_header`` are the exact on-the-wire bytes
    (including options); ``payload_len`` is the transport payload size in
    bytes. Payload contents are never retained.
    """

    timestamp: float
    ip_header: bytes
    transport_header: bytes
    transport_proto: int  # TCP or UDP
    payload_len: int

    def __post_init__(self):
        if self.transport_proto not in (TCP, UDP):
            raise ValueError(f"transport_proto must be 6 (TCP) or 17 (UDP), got {self.transport_proto}")
        if len(self.ip_header) < 20:
            raise ValueError(f"IPv4 header must be >= 20 bytes, got {len(self.ip_header)}")
        if self.transport_proto == TCP and len(self.transport_header) < 20:
            raise ValueError(f"TCP header must be >= 20 bytes, got {len(self.transport_header)}")
        if self.transport_proto == UDP and len(self.transport_header) != 8:
            raise ValueError(f"UDP header must be exactly 8 bytes, got {len(self.transport_header)}")
        if self.payload_len < 0:
            raise ValueError(f"payload_len must be >= 0, got {self.payload_len}")


@dataclass(frozen=True, order=True)
class FlowKey:
    """5-tuple identifying a flow, oriented by its first-seen packet."""

    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    proto: int

    def reversed(self) -> "FlowKey":
        return FlowKey(self.dst_ip, self.src_ip, self.dst_port, self.src_port, self.proto)

    def canonical(self) -> tuple:
        """Direction-insensitive form used to group packets into flows."""
        a = (self.src_ip, self.src_port)
        b = (self.dst_ip, self.dst_port)
        return (self.proto,) + tuple(sorted((a, b)))


def _snapshot_endpoints(p: PacketSnapshot) -> tuple[str, int, str, int]:
    sip = ".".join(str(b) for b in p.ip_header[12:16])
    dip = ".".join(str(b) for b in p.ip_header[16:20])
    sport = int.from_bytes(p.transport_header[0:2], "big")
    dport = int.from_bytes(p.transport_header[2:4], "big")
    return sip, sport, dip, dport


@dataclass
class FlowRecord:
    """One labeled flow with its first packets, sorted by timestamp."""

    key: FlowKey
    label: int
    packets: tuple[PacketSnapshot, ...]

    def __post_init__(self):
        if not self.packets:
            raise ValueError("a flow must contain at least one packet")
        ts = [p.timestamp for p in self.packets]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise ValueError("flow packets must be sorted by timestamp")
        fwd = (self.key.src_ip, self.key.src_port, self.key.dst_ip, self.key.dst_port)
        rev = (self.key.dst_ip, self.key.dst_port, self.key.src_ip, self.key.src_port)
        for p in self.packets:
            sip, sport, dip, dport = _snapshot_endpoints(p)
            if p.transport_proto != self.key.proto or (sip, sport, dip, dport) not in (fwd, rev):
                raise ValueError(
                    f"packet {sip}:{sport}->{dip}:{dport}/{p.transport_proto} "
                    f"does not match flow key {self.key}"
                )


@dataclass
class FlowSet:
    """A collection of labeled flows plus the class-id -> name mapping."""

    flows: list[FlowRecord]
    label_names: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        missing = {f.label for f in self.flows} - set(self.label_names)
        if missing:
            raise ValueError(f"flow labels {sorted(missing)} missing from label_names")

    def __len__(self) -> int:
        return len(self.flows)

    def labels(self) -> np.ndarray:
        return np.array([f.label for f in self.flows], dtype=np.int64)

    def subset(self, indices: Sequence[int]) -> "FlowSet":
        return FlowSet([self.flows[i] for i in indices], dict(self.label_names))

    def class_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for f in self.flows:
            counts[f.label] = counts.get(f.label, 0) + 1
        return counts


def split_train_test(flowset: FlowSet, train_fraction: float, seed: int) -> tuple[FlowSet, FlowSet]:
    """Deterministic train/test partition of a flow set.

    Stratified by label when every class has at least two flows, otherwise
    a plain shuffled split. Per stratum the train share is
    floor(fraction * n), which always leaves at least one test flow.
    """
    if not flowset.flows:
        raise ConfigError("cannot split an empty flow set")
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train_fraction must be in (0, 1), got {train_fraction}")

    rng = np.random.default_rng(seed)
    counts = flowset.class_counts()
    stratify = all(c >= 2 for c in counts.values())

    if stratify:
        groups = {label: [] for label in counts}
        for i, f in enumerate(flowset.flows):
            groups[f.label].append(i)
        group_lists = [groups[label] for label in sorted(groups)]
    else:
        group_lists = [list(range(len(flowset.flows)))]

    train_idx: list[int] = []
    test_idx: list[int] = []
    for indices in group_lists:
        order = rng.permutation(len(indices))
        shuffled = [indices[j] for j in order]
        n_train = int(train_fraction * len(shuffled))
        train_idx.extend(shuffled[:n_train])
        test_idx.extend(shuffled[n_train:])

    train_idx.sort()
    test_idx.sort()
    return flowset.subset(train_idx), flowset.subset(test_idx)


def _snapshot_to_json(p: PacketSnapshot) -> dict:
    return {
        "ts": p.timestamp,
        "ip": p.ip_header.hex(),
        "tp": p.transport_header.hex(),
        "proto": p.transport_proto,
        "plen": p.payload_len,
    }


def _snapshot_from_json(d: Mapping) -> PacketSnapshot:
    return PacketSnapshot(
        timestamp=float(d["ts"]),
        ip_header=bytes.fromhex(d["ip"]),
        transport_header=bytes.fromhex(d["tp"]),
        transport_proto=int(d["proto"]),
        payload_len=int(d["plen"]),
    )


def save_flowset(flowset: FlowSet, path: str | Path) -> None:
    """Write a flow set as compact JSON (hex-encoded header bytes)."""
    doc = {
        "format": FLOWSET_FORMAT,
        "label_names": {str(k): v for k, v in sorted(flowset.label_names.items())},
        "flows": [
            {
                "key": [f.key.src_ip, f.key.dst_ip, f.key.src_port, f.key.dst_port, f.key.proto],
                "label": f.label,
                "packets": [_snapshot_to_json(p) for p in f.packets],
            }
            for f in flowset.flows
        ],
    }
    Path(path).write_text(json.dumps(doc, separators=(",", ":")) + "\n")


def load_flowset(path: str | Path) -> FlowSet:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != FLOWSET_FORMAT:
        raise ConfigError(f"unsupported flowset format {doc.get('format')!r} in {path}")
    flows = [
        FlowRecord(
            key=FlowKey(k[0], k[1], int(k[2]), int(k[3]), int(k[4])),
            label=int(entry["label"]),
            packets=tuple(_snapshot_from_json(p) for p in entry["packets"]),
        )
        for entry in doc["flows"]
        for k in [entry["key"]]
    ]
    label_names = {int(k): v for k, v in doc["label_names"].items()}
    return FlowSet(flows, label_names)
