"""Domain types shared by every protocol module, plus canonical serialization.

Every value that crosses a party boundary (hash inputs, envelope payloads,
file exports) goes through :func:`canonical_encode`, a length-prefixed,
field-ordered binary encoding that is bit-stable across parties and runs.
All types are immutable values; protocol actors exchange copies only.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Iterable, Mapping

Token = str


class InvariantError(ValueError):
    """A domain value violates one of its declared invariants."""


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GatewayId:
    """Pseudonymous identity of a smart-home gateway within one run."""

    pseudonym: str
    index: int

    def validate(self) -> None:
        if not self.pseudonym:
            raise InvariantError("gateway pseudonym must be non-empty")
        if self.index < 0:
            raise InvariantError("gateway index must be nonnegative")


@dataclass(frozen=True)
class Event:
    """A single logged event: an opaque token plus device/time metadata.

    Event identity for all set operations is the event_id token alone;
    timestamps and attrs never participate in vocabulary comparisons.
    """

    event_id: Token
    device_id: str
    timestamp: int
    attrs: Mapping[str, str] = field(default_factory=dict)

    def validate(self) -> None:
        if not self.event_id:
            raise InvariantError("event_id must be non-empty")
        if self.timestamp < 0:
            raise InvariantError(f"timestamp must be >= 0, got {self.timestamp}")


@dataclass(frozen=True)
class EventLog:
    """An ordered, timestamp-nondecreasing record of one gateway's events."""

    gateway: GatewayId
    records: tuple[Event, ...]

    def validate(self) -> None:
        self.gateway.validate()
        prev = -1
        for rec in self.records:
            rec.validate()
            if rec.timestamp < prev:
                raise InvariantError("records must be timestamp-nondecreasing")
            prev = rec.timestamp

    def tokens(self) -> set[Token]:
        return {rec.event_id for rec in self.records}


@dataclass(frozen=True)
class SanitizedLog:
    """The public counterpart of an EventLog: hypernym tokens, sensitive
    records removed and counted.  suppressed_count stays owner-local and is
    never serialized into protocol messages."""

    gateway: GatewayId
    records: tuple[Event, ...]
    suppressed_count: int

    def validate(self) -> None:
        self.gateway.validate()
        if self.suppressed_count < 0:
            raise InvariantError("suppressed_count must be nonnegative")
        for rec in self.records:
            rec.validate()

    def tokens(self) -> set[Token]:
        return {rec.event_id for rec in self.records}


@dataclass(frozen=True)
class TaxonomyTree:
    """Rooted hypernym tree over event tokens: child -> parent mapping."""

    parent: Mapping[Token, Token]
    root: Token

    @property
    def nodes(self) -> set[Token]:
        return set(self.parent) | {self.root}

    def validate(self) -> None:
        if self.parent.get(self.root, self.root) != self.root:
            raise InvariantError("root must be its own parent (or absent)")
        for node in self.parent:
            self.path_to_root(node)  # raises on cycles / dangling parents

    def path_to_root(self, token: Token) -> list[Token]:
        """Path [root, ..., token]; raises InvariantError on unknown tokens."""
        if token != self.root and token not in self.parent:
            raise InvariantError(f"unknown taxonomy token: {token!r}")
        path = [token]
        seen = {token}
        while path[-1] != self.root:
            up = self.parent.get(path[-1])
            if up is None:
                raise InvariantError(f"token {path[-1]!r} has no parent")
            if up in seen and up != self.root:
                raise InvariantError(f"taxonomy cycle through {up!r}")
            path.append(up)
            seen.add(up)
        path.reverse()
        return path

    def depth(self, token: Token) -> int:
        return len(self.path_to_root(token)) - 1


@dataclass(frozen=True)
class EventVector:
    """Per-gateway significance weights over event tokens.

    ``tokens`` holds every distinct token of the source log (the vector's
    dimension); ``weights`` omits zero entries, so tokens present in every
    log appear in ``tokens`` but carry no weight.
    """

    owner: GatewayId
    weights: Mapping[Token, float]
    tokens: frozenset[Token]

    @property
    def dimension(self) -> int:
        return len(self.tokens)

    def validate(self) -> None:
        self.owner.validate()
        for token, w in self.weights.items():
            if w <= 0.0:
                raise InvariantError(f"weight for {token!r} must be > 0 (absent means 0)")
        if not set(self.weights) <= self.tokens:
            raise InvariantError("every weighted token must be a vector token")


@dataclass(frozen=True)
class RealThreatGroup:
    """A group defined by shared events, its member gateways and a core point."""

    events: frozenset[Token]
    members: frozenset[GatewayId]
    core_point: Token
    level: int

    def validate(self) -> None:
        if not self.events:
            raise InvariantError("a real threat group needs at least one defining event")
        if self.core_point not in self.events:
            raise InvariantError("core point must be one of the defining events")
        if self.level != len(self.events):
            raise InvariantError("level must equal the defining-event count")

    def canonical_id(self) -> str:
        return "|".join(sorted(self.events))


@dataclass(frozen=True)
class VirtualThreatGroup:
    """A cluster of gateways holding a set of real threat groups."""

    groups: tuple[RealThreatGroup, ...]
    members: frozenset[GatewayId]
    trusted_node: GatewayId

    def validate(self) -> None:
        if self.trusted_node not in self.members:
            raise InvariantError("trusted node must be a member")
        for group in self.groups:
            group.validate()


def groups_are_disjoint(vc: VirtualThreatGroup) -> bool:
    """True when the VC's real groups have pairwise-disjoint members and
    pairwise-distinct defining event sets."""
    seen_members: set[GatewayId] = set()
    seen_events: set[frozenset[Token]] = set()
    for group in vc.groups:
        if group.members & seen_members:
            return False
        if group.events in seen_events:
            return False
        seen_members |= group.members
        seen_events.add(group.events)
    return True


# ---------------------------------------------------------------------------
# Canonical binary encoding
# ---------------------------------------------------------------------------

_TAG_EVENT = b"E"
_TAG_LOG = b"L"
_TAG_SAN = b"S"
_TAG_TAX = b"T"
_TAG_GW = b"G"
_TAG_VEC = b"V"
_TAG_RC = b"R"
_TAG_VC = b"C"
_TAG_TOKEN = b"t"
_TAG_TOKSET = b"s"


def _w_str(out: bytearray, s: str) -> None:
    raw = s.encode("utf-8")
    out += struct.pack(">I", len(raw))
    out += raw


def _w_u64(out: bytearray, n: int) -> None:
    out += struct.pack(">Q", n)


def _w_f64(out: bytearray, x: float) -> None:
    out += struct.pack(">d", x)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ValueError("truncated encoding")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def r_str(self) -> str:
        (n,) = struct.unpack(">I", self.take(4))
        return self.take(n).decode("utf-8")

    def r_u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def r_f64(self) -> float:
        return struct.unpack(">d", self.take(8))[0]


def _encode_into(out: bytearray, value) -> None:
    if isinstance(value, Event):
        out += _TAG_EVENT
        _w_str(out, value.event_id)
        _w_str(out, value.device_id)
        _w_u64(out, value.timestamp)
        _w_u64(out, len(value.attrs))
        for k in sorted(value.attrs):
            _w_str(out, k)
            _w_str(out, value.attrs[k])
    elif isinstance(value, SanitizedLog):
        out += _TAG_SAN
        _encode_into(out, value.gateway)
        _w_u64(out, value.suppressed_count)
        _w_u64(out, len(value.records))
        for rec in value.records:
            _encode_into(out, rec)
    elif isinstance(value, EventLog):
        out += _TAG_LOG
        _encode_into(out, value.gateway)
        _w_u64(out, len(value.records))
        for rec in value.records:
            _encode_into(out, rec)
    elif isinstance(value, TaxonomyTree):
        out += _TAG_TAX
        _w_str(out, value.root)
        _w_u64(out, len(value.parent))
        for child in sorted(value.parent):
            _w_str(out, child)
            _w_str(out, value.parent[child])
    elif isinstance(value, GatewayId):
        out += _TAG_GW
        _w_str(out, value.pseudonym)
        _w_u64(out, value.index)
    elif isinstance(value, EventVector):
        out += _TAG_VEC
        _encode_into(out, value.owner)
        _w_u64(out, len(value.tokens))
        for token in sorted(value.tokens):
            _w_str(out, token)
        _w_u64(out, len(value.weights))
        for token in sorted(value.weights):
            _w_str(out, token)
            _w_f64(out, value.weights[token])
    elif isinstance(value, RealThreatGroup):
        out += _TAG_RC
        _w_u64(out, len(value.events))
        for token in sorted(value.events):
            _w_str(out, token)
        _w_u64(out, len(value.members))
        for gw in sorted(value.members, key=lambda g: g.pseudonym):
            _encode_into(out, gw)
        _w_str(out, value.core_point)
        _w_u64(out, value.level)
    elif isinstance(value, VirtualThreatGroup):
        out += _TAG_VC
        _w_u64(out, len(value.groups))
        for group in value.groups:
            _encode_into(out, group)
        _w_u64(out, len(value.members))
        for gw in sorted(value.members, key=lambda g: g.pseudonym):
            _encode_into(out, gw)
        _encode_into(out, value.trusted_node)
    else:
        raise TypeError(f"no canonical encoding for {type(value).__name__}")


def canonical_encode(value) -> bytes:
    """Deterministic, injective byte encoding of any domain value.

    Refuses values that violate their invariants so no malformed value can
    enter a hash or a wire message.
    """
    value.validate()
    out = bytearray()
    _encode_into(out, value)
    return bytes(out)


def encode_token(token: Token) -> bytes:
    """Canonical bytes for a bare event token (protocol hash input)."""
    out = bytearray(_TAG_TOKEN)
    _w_str(out, token)
    return bytes(out)


def encode_token_set(tokens: Iterable[Token]) -> bytes:
    """Canonical bytes for a set of event tokens, order-independent."""
    out = bytearray(_TAG_TOKSET)
    ordered = sorted(set(tokens))
    _w_u64(out, len(ordered))
    for token in ordered:
        _w_str(out, token)
    return bytes(out)


def _decode_from(r: _Reader):
    tag = r.take(1)
    if tag == _TAG_EVENT:
        event_id = r.r_str()
        device_id = r.r_str()
        ts = r.r_u64()
        attrs = {r.r_str(): r.r_str() for _ in range(r.r_u64())}
        return Event(event_id, device_id, ts, attrs)
    if tag == _TAG_SAN:
        gw = _decode_from(r)
        suppressed = r.r_u64()
        records = tuple(_decode_from(r) for _ in range(r.r_u64()))
        return SanitizedLog(gw, records, suppressed)
    if tag == _TAG_LOG:
        gw = _decode_from(r)
        records = tuple(_decode_from(r) for _ in range(r.r_u64()))
        return EventLog(gw, records)
    if tag == _TAG_TAX:
        root = r.r_str()
        parent = {r.r_str(): r.r_str() for _ in range(r.r_u64())}
        return TaxonomyTree(parent, root)
    if tag == _TAG_GW:
        return GatewayId(r.r_str(), r.r_u64())
    if tag == _TAG_VEC:
        owner = _decode_from(r)
        tokens = frozenset(r.r_str() for _ in range(r.r_u64()))
        weights = {}
        for _ in range(r.r_u64()):
            token = r.r_str()
            weights[token] = r.r_f64()
        return EventVector(owner, weights, tokens)
    if tag == _TAG_RC:
        events = frozenset(r.r_str() for _ in range(r.r_u64()))
        members = frozenset(_decode_from(r) for _ in range(r.r_u64()))
        core = r.r_str()
        level = r.r_u64()
        return RealThreatGroup(events, members, core, level)
    if tag == _TAG_VC:
        groups = tuple(_decode_from(r) for _ in range(r.r_u64()))
        members = frozenset(_decode_from(r) for _ in range(r.r_u64()))
        trusted = _decode_from(r)
        return VirtualThreatGroup(groups, members, trusted)
    raise ValueError(f"unknown type tag {tag!r}")


def canonical_decode(data: bytes):
    """Inverse of canonical_encode; raises ValueError on malformed input."""
    r = _Reader(data)
    value = _decode_from(r)
    if r.pos != len(data):
        raise ValueError("trailing bytes after encoded value")
    return value


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------


def save_event_logs(logs: Iterable[EventLog], path) -> None:
    """One JSON object per line: gateway, event, device, ts, attrs."""
    with open(path, "w", encoding="utf-8") as fh:
        for log in logs:
            for rec in log.records:
                fh.write(
                    json.dumps(
                        {
                            "gateway": log.gateway.pseudonym,
                            "event": rec.event_id,
                            "device": rec.device_id,
                            "ts": rec.timestamp,
                            "attrs": dict(rec.attrs),
                        },
                        sort_keys=True,
                    )
                )
                fh.write("\n")


def load_event_logs(path) -> list[EventLog]:
    """Load JSONL event records, grouping by gateway pseudonym.

    Gateway indexes are assigned in order of first appearance, which the
    synthesizer writes in index order, so round-trips are stable.
    """
    by_gateway: dict[str, list[Event]] = {}
    order: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            pseudo = obj["gateway"]
            if pseudo not in by_gateway:
                by_gateway[pseudo] = []
                order.append(pseudo)
            by_gateway[pseudo].append(
                Event(obj["event"], obj["device"], int(obj["ts"]), obj.get("attrs", {}))
            )
    logs = []
    for index, pseudo in enumerate(order):
        records = tuple(sorted(by_gateway[pseudo], key=lambda e: e.timestamp))
        logs.append(EventLog(GatewayId(pseudo, index), records))
    return logs


def save_taxonomy(tree: TaxonomyTree, path) -> None:
    """One "child<TAB>parent" pair per line; the root listed as its own parent."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{tree.root}\t{tree.root}\n")
        for child in sorted(tree.parent):
            fh.write(f"{child}\t{tree.parent[child]}\n")


def load_taxonomy(path) -> TaxonomyTree:
    parent: dict[Token, Token] = {}
    root: Token | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            child, _, up = line.partition("\t")
            if child == up:
                root = child
            else:
                parent[child] = up
    if root is None:
        raise InvariantError("taxonomy file lists no root (a line with child == parent)")
    tree = TaxonomyTree(parent, root)
    tree.validate()
    return tree
