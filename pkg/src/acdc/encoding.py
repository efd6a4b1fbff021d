"""Ternary bit encoding of packet headers restricted to a field subset.

Each flow is encoded from its first ``k_packets`` packets (3 by default).
Per packet, every selected field is expanded MSB-first into 0/1 bits taken
from the raw header bytes; a field whose protocol header is absent in that
packet encodes as all -1, and packets beyond the end of a short flow
encode as all -1. Option regions are zero-padded to their fixed width.

The resulting vector layout is packet-major: for packet q and subset
fields f1 < f2 < ... (canonical id order) the columns are

    [pkt0: f1 bits, f2 bits, ...][pkt1: ...][pkt2: ...]

so a flow always encodes to exactly ``3 * subset_bits(subset)`` values,
independent of its contents.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import EncodeError
from .fields import FieldRegistry, FieldSpec, field_registry
from .flows import TCP, UDP, FlowRecord, PacketSnapshot

__all__ = [
    "FeatureSubset",
    "subset_bits",
    "subset_layout",
    "encode_flow",
    "encode_flows",
    "stage_batch",
    "encode_staged",
    "TernaryHeaderEncoder",
    "bits_to_uint",
]

DEFAULT_PACKETS = 3


@dataclass(frozen=True)
class FeatureSubset:
    """An ordered set of field ids; ordering is canonical (ascending id)."""

    field_ids: tuple[int, ...]

    def __post_init__(self):
        if not self.field_ids:
            raise ValueError("a feature subset must not be empty")
        if len(set(self.field_ids)) != len(self.field_ids):
            raise ValueError(f"duplicate field ids in subset: {self.field_ids}")
        object.__setattr__(self, "field_ids", tuple(sorted(self.field_ids)))

    @classmethod
    def of(cls, fields: Iterable[int | str | FieldSpec], registry: FieldRegistry | None = None) -> "FeatureSubset":
        """Build a subset from ids, "proto.name" strings, or FieldSpecs."""
        registry = registry or field_registry()
        ids = []
        for f in fields:
            if isinstance(f, FieldSpec):
                ids.append(f.id)
            elif isinstance(f, str):
                ids.append(registry.by_dotted(f).id)
            else:
                ids.append(registry[int(f)].id)
        return cls(tuple(ids))

    def specs(self, registry: FieldRegistry | None = None) -> tuple[FieldSpec, ...]:
        registry = registry or field_registry()
        return tuple(registry[i] for i in self.field_ids)

    def dotted_names(self, registry: FieldRegistry | None = None) -> tuple[str, ...]:
        return tuple(s.dotted for s in self.specs(registry))

    def __len__(self) -> int:
        return len(self.field_ids)

    def __contains__(self, field_id: int) -> bool:
        return field_id in self.field_ids


def subset_bits(subset: FeatureSubset, registry: FieldRegistry | None = None) -> int:
    """Aggregated per-packet bit width of the subset's fields."""
    return sum(s.bits for s in subset.specs(registry))


def subset_layout(
    subset: FeatureSubset,
    k_packets: int = DEFAULT_PACKETS,
    registry: FieldRegistry | None = None,
) -> dict[int, np.ndarray]:
    """Column indices of each field across all encoded packets.

    Used by permutation importance to shuffle a field's bit columns
    jointly over every packet position.
    """
    specs = subset.specs(registry)
    width = sum(s.bits for s in specs)
    layout: dict[int, np.ndarray] = {}
    start = 0
    for s in specs:
        cols = np.concatenate(
            [np.arange(q * width + start, q * width + start + s.bits) for q in range(k_packets)]
        )
        layout[s.id] = cols
        start += s.bits
    return layout


def _unpack_header(header: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(header, dtype=np.uint8))


class _PacketBits:
    """Lazily unpacked header bit strings for one packet."""

    def __init__(self, packet: PacketSnapshot):
        self.packet = packet
        self._ip: np.ndarray | None = None
        self._transport: np.ndarray | None = None

    def section(self, name: str) -> np.ndarray:
        if name == "ip":
            if self._ip is None:
                self._ip = _unpack_header(self.packet.ip_header)
            return self._ip
        if self._transport is None:
            self._transport = _unpack_header(self.packet.transport_header)
        return self._transport


def _field_present(spec: FieldSpec, packet: PacketSnapshot) -> bool:
    if spec.section == "ip":
        return True
    # Transport-section fields: the legacy "ipv4"-labeled port pair is
    # carried by both TCP and UDP; protocol-specific fields need a match.
    if spec.protocol == "ipv4":
        return True
    want = TCP if spec.protocol == "tcp" else UDP
    return packet.transport_proto == want


def _encode_field(spec: FieldSpec, pbits: _PacketBits, out: np.ndarray) -> None:
    """Fill ``out`` (length spec.bits) with the field's bits for one packet."""
    if not spec.encodable:
        raise EncodeError(f"field {spec.dotted} has no retained bytes and cannot be encoded")
    if not _field_present(spec, pbits.packet):
        out.fill(-1)
        return
    bits = pbits.section(spec.section)
    if spec.variable:
        # Options region: whatever bytes follow the fixed header, then
        # zero padding up to the fixed 320-bit width.
        region = bits[spec.bit_offset :]
        if region.size > spec.bits:
            raise EncodeError(
                f"field {spec.dotted} options region is {region.size} bits, exceeds {spec.bits}"
            )
        out[: region.size] = region
        out[region.size :] = 0
        return
    end = spec.bit_offset + spec.bits
    if end > bits.size:
        raise EncodeError(
            f"field {spec.dotted} needs bits [{spec.bit_offset}, {end}) "
            f"but the header has only {bits.size} bits"
        )
    out[:] = bits[spec.bit_offset : end]


def encode_flow(
    flow: FlowRecord,
    subset: FeatureSubset,
    k_packets: int = DEFAULT_PACKETS,
    registry: FieldRegistry | None = None,
) -> np.ndarray:
    """Encode one flow into a ternary vector of length k_packets * subset_bits."""
    specs = subset.specs(registry)
    width = sum(s.bits for s in specs)
    vec = np.empty(k_packets * width, dtype=np.int8)
    for q in range(k_packets):
        base = q * width
        if q >= len(flow.packets):
            vec[base : base + width] = -1
            continue
        pbits = _PacketBits(flow.packets[q])
        start = base
        for s in specs:
            _encode_field(s, pbits, vec[start : start + s.bits])
            start += s.bits
    return vec


MAX_HEADER_BYTES = 60  # IPv4 and TCP both cap at 15 * 4 bytes


def stage_batch(flows: Sequence[FlowRecord], k_packets: int = DEFAULT_PACKETS) -> dict:
    """Pack raw headers of a batch into fixed-width byte matrices.

    This is the staged "extracted raw features" layout a classifier
    instance loads before preprocessing: per flow and packet position,
    the unmodified header bytes zero-padded to 60, plus the transport
    protocol (0 marks a missing packet). No per-field work happens here.
    """
    n = len(flows)
    ip = np.zeros((n, k_packets, MAX_HEADER_BYTES), dtype=np.uint8)
    tp = np.zeros((n, k_packets, MAX_HEADER_BYTES), dtype=np.uint8)
    ip_len = np.zeros((n, k_packets), dtype=np.uint8)
    tp_len = np.zeros((n, k_packets), dtype=np.uint8)
    proto = np.zeros((n, k_packets), dtype=np.uint8)
    for i, flow in enumerate(flows):
        for q, packet in enumerate(flow.packets[:k_packets]):
            hdr = packet.ip_header
            trp = packet.transport_header
            ip[i, q, : len(hdr)] = np.frombuffer(hdr, dtype=np.uint8)
            tp[i, q, : len(trp)] = np.frombuffer(trp, dtype=np.uint8)
            ip_len[i, q] = len(hdr)
            tp_len[i, q] = len(trp)
            proto[i, q] = packet.transport_proto
    return {"ip": ip, "tp": tp, "ip_len": ip_len, "tp_len": tp_len, "proto": proto}


def _presence_mask(spec: FieldSpec, proto_col: np.ndarray) -> np.ndarray:
    if spec.section == "ip" or spec.protocol == "ipv4":
        return proto_col != 0
    want = TCP if spec.protocol == "tcp" else UDP
    return proto_col == want


def encode_staged(
    staged: dict,
    subset: FeatureSubset,
    k_packets: int = DEFAULT_PACKETS,
    registry: FieldRegistry | None = None,
) -> np.ndarray:
    """Vectorized encoding of a staged batch; only the byte windows the
    subset touches are unpacked, so cost scales with bits x batch size."""
    specs = subset.specs(registry)
    width = sum(s.bits for s in specs)
    n = staged["proto"].shape[0]
    X = np.empty((n, k_packets * width), dtype=np.int8)
    for q in range(k_packets):
        proto_col = staged["proto"][:, q]
        start = q * width
        for s in specs:
            if not s.encodable:
                raise EncodeError(f"field {s.dotted} has no retained bytes and cannot be encoded")
            buf = staged["ip"] if s.section == "ip" else staged["tp"]
            b0 = s.bit_offset // 8
            b1 = (s.bit_offset + s.bits + 7) // 8
            window = np.unpackbits(np.ascontiguousarray(buf[:, q, b0:b1]), axis=1)
            off = s.bit_offset - 8 * b0
            block = window[:, off : off + s.bits].astype(np.int8)
            # zero-padding of the staged buffers doubles as the option
            # regions' zero fill; absent headers overwrite with -1
            block[~_presence_mask(s, proto_col)] = -1
            X[:, start : start + s.bits] = block
            start += s.bits
    return X


def encode_flows(
    flows: Sequence[FlowRecord],
    subset: FeatureSubset,
    k_packets: int = DEFAULT_PACKETS,
    registry: FieldRegistry | None = None,
) -> np.ndarray:
    """Encode many flows into an (n_flows, k_packets * subset_bits) matrix."""
    return encode_staged(stage_batch(flows, k_packets), subset, k_packets, registry)


class TernaryHeaderEncoder(BaseEstimator, TransformerMixin):
    """Transformer from flow records to ternary header-bit matrices.

    Parameters
    ----------
    fields : sequence of field ids, "proto.name" strings, or FieldSpecs.
    k_packets : number of leading packets encoded per flow.
    """

    def __init__(self, fields: Sequence[int | str] = (), k_packets: int = DEFAULT_PACKETS):
        self.fields = fields
        self.k_packets = k_packets

    def fit(self, X=None, y=None):
        if self.k_packets < 1:
            raise ValueError(f"k_packets must be >= 1, got {self.k_packets}")
        self.subset_ = FeatureSubset.of(self.fields)
        self.registry_ = field_registry()
        self.width_ = subset_bits(self.subset_, self.registry_)
        self.n_features_out_ = self.k_packets * self.width_
        return self

    def transform(self, X: Sequence[FlowRecord]) -> np.ndarray:
        if not hasattr(self, "subset_"):
            self.fit()
        return encode_flows(X, self.subset_, self.k_packets, self.registry_)


def bits_to_uint(bits: Sequence[int]) -> int:
    """Re-pack MSB-first 0/1 bits into an unsigned integer."""
    value = 0
    for b in bits:
        if b not in (0, 1):
            raise ValueError(f"cannot re-pack non-binary bit {b!r}")
        value = (value << 1) | int(b)
    return value
