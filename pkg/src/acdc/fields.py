"""Registry of packet-header fields available to the feature exploration.

Every field the encoder knows about is described by a :class:`FieldSpec`:
which protocol header it lives in, its bit window inside that header, and
whether it survived the two selection stages (the preliminary pass that
drops overfitting-prone fields such as addresses and ports, and the
heuristic pass that keeps the fields worth building classifiers from).

The registry is a fixed table: 37 fields total, 32 eligible after the
preliminary pass, 18 kept by the heuristic pass.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterator

__all__ = [
    "FieldSpec",
    "FieldRegistry",
    "field_registry",
    "TOTAL_FIELD_COUNT",
    "PRELIMINARY_ELIGIBLE_COUNT",
    "HEURISTIC_SELECTED_COUNT",
]

TOTAL_FIELD_COUNT = 37
PRELIMINARY_ELIGIBLE_COUNT = 32
HEURISTIC_SELECTED_COUNT = 18


@dataclass(frozen=True)
class FieldSpec:
    """One header field: its bit window and selection flags.

    ``bit_offset`` is the position of the field's first bit inside the
    protocol header's bit layout (MSB-first, options region starting at
    the end of the fixed header). ``section`` says which raw buffer the
    bits come from: the IPv4 header, the transport header, or the payload
    (payload fields are registry entries only and cannot be encoded).
    """

    id: int
    protocol: str  # "ipv4" | "tcp" | "udp" (registry label, see `section`)
    name: str
    bits: int
    bit_offset: int
    preliminary_eligible: bool
    heuristic_selected: bool
    section: str = "ip"  # "ip" | "transport" | "payload"
    variable: bool = False  # options region: zero-padded to `bits`

    @property
    def dotted(self) -> str:
        return f"{self.protocol}.{self.name}"

    @property
    def encodable(self) -> bool:
        return self.section != "payload"


def _spec(fid, proto, name, bits, offset, prelim, heur, section, variable=False):
    return FieldSpec(fid, proto, name, bits, offset, prelim, heur, section, variable)


# Fixed registry rows, in canonical id order. Bit offsets follow the
# standard IPv4/TCP/UDP layouts. Two deliberate quirks:
#   * ipv4.sport / ipv4.dport keep their legacy "ipv4" label but are read
#     from the first four bytes of the transport header (TCP and UDP both
#     put the port pair there).
#   * ipv4.tl is registered as an 8-bit window (the high byte of the
#     16-bit total-length field) so that per-bit cost accounting matches
#     the reference feature table this registry reproduces.
_FIELDS: tuple[FieldSpec, ...] = (
    _spec(0, "ipv4", "ttl", 8, 64, True, True, "ip"),
    _spec(1, "tcp", "opt", 320, 160, True, True, "transport", True),
    _spec(2, "ipv4", "dfbit", 1, 49, True, True, "ip"),
    _spec(3, "tcp", "doff", 4, 96, True, True, "transport"),
    _spec(4, "tcp", "wsize", 16, 112, True, True, "transport"),
    _spec(5, "tcp", "fin", 1, 111, True, True, "transport"),
    _spec(6, "ipv4", "cksum", 16, 80, True, True, "ip"),
    _spec(7, "tcp", "ackf", 1, 107, True, True, "transport"),
    _spec(8, "udp", "len", 16, 32, True, True, "transport"),
    _spec(9, "tcp", "cksum", 16, 128, True, True, "transport"),
    _spec(10, "udp", "cksum", 16, 48, True, True, "transport"),
    _spec(11, "ipv4", "tl", 8, 16, True, True, "ip"),
    _spec(12, "ipv4", "tos", 8, 8, True, True, "ip"),
    _spec(13, "ipv4", "proto", 8, 72, True, True, "ip"),
    _spec(14, "tcp", "seq", 32, 32, True, True, "transport"),
    _spec(15, "tcp", "psh", 1, 108, True, True, "transport"),
    _spec(16, "tcp", "ackn", 32, 64, True, True, "transport"),
    _spec(17, "tcp", "rst", 1, 109, True, True, "transport"),
    _spec(18, "tcp", "res", 3, 100, True, False, "transport"),
    _spec(19, "ipv4", "foff", 13, 51, True, False, "ip"),
    _spec(20, "tcp", "urp", 16, 144, True, False, "transport"),
    _spec(21, "tcp", "urg", 1, 106, True, False, "transport"),
    _spec(22, "tcp", "syn", 1, 110, True, False, "transport"),
    _spec(23, "tcp", "ns", 1, 103, True, False, "transport"),
    _spec(24, "ipv4", "hl", 4, 4, True, False, "ip"),
    _spec(25, "tcp", "ece", 1, 105, True, False, "transport"),
    _spec(26, "ipv4", "mfbit", 1, 50, True, False, "ip"),
    _spec(27, "ipv4", "opt", 320, 160, True, False, "ip", True),
    _spec(28, "ipv4", "rbit", 1, 48, True, False, "ip"),
    _spec(29, "tcp", "cwr", 1, 104, True, False, "transport"),
    _spec(30, "ipv4", "ver", 4, 0, True, False, "ip"),
    _spec(31, "ipv4", "id", 16, 32, True, False, "ip"),
    _spec(32, "ipv4", "sport", 16, 0, False, False, "transport"),
    _spec(33, "ipv4", "dport", 16, 16, False, False, "transport"),
    _spec(34, "ipv4", "sip", 32, 96, False, False, "ip"),
    _spec(35, "ipv4", "dip", 32, 128, False, False, "ip"),
    _spec(36, "tcp", "payload", 12000, 0, False, False, "payload"),
)


class FieldRegistry:
    """Immutable lookup table over the fixed field set."""

    def __init__(self, fields: tuple[FieldSpec, ...] = _FIELDS):
        self._fields = fields
        self._by_id = {f.id: f for f in fields}
        self._by_name = {(f.protocol, f.name): f for f in fields}
        if len(self._by_id) != len(fields):
            raise ValueError("duplicate field ids in registry")

    def __len__(self) -> int:
        return len(self._fields)

    def __iter__(self) -> Iterator[FieldSpec]:
        return iter(self._fields)

    def __getitem__(self, field_id: int) -> FieldSpec:
        try:
            return self._by_id[field_id]
        except KeyError:
            raise KeyError(f"unknown field id {field_id}") from None

    def __contains__(self, field_id: int) -> bool:
        return field_id in self._by_id

    def lookup(self, protocol: str, name: str) -> FieldSpec:
        try:
            return self._by_name[(protocol, name)]
        except KeyError:
            raise KeyError(f"unknown field {protocol}.{name}") from None

    def by_dotted(self, dotted: str) -> FieldSpec:
        """Resolve a "proto.name" string such as "ipv4.ttl"."""
        proto, _, name = dotted.partition(".")
        if not name:
            raise KeyError(f"field name {dotted!r} is not of the form proto.name")
        return self.lookup(proto, name)

    def preliminary_eligible(self) -> tuple[FieldSpec, ...]:
        return tuple(f for f in self._fields if f.preliminary_eligible)

    def heuristic_selected(self) -> tuple[FieldSpec, ...]:
        return tuple(f for f in self._fields if f.heuristic_selected)

    def to_csv(self) -> str:
        """Dump the registry as CSV (one row per field, id order)."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["id", "header", "field", "bits", "preliminary_eligible", "heuristic_selected"]
        )
        for f in self._fields:
            writer.writerow(
                [
                    f.id,
                    f.protocol,
                    f.name,
                    f.bits,
                    "Y" if f.preliminary_eligible else "N",
                    "Y" if f.heuristic_selected else "N",
                ]
            )
        return buf.getvalue()


_REGISTRY = FieldRegistry()


def field_registry() -> FieldRegistry:
    """Return the process-wide immutable field registry."""
    return _REGISTRY
