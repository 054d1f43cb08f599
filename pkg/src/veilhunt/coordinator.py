"""The centralized threat-intelligence hub: initiates hunts, proxies every
message between gateways, stores whatever it sees, and publishes the final
group catalog.

The hub is the semi-honest adversary of the system model: it follows the
protocol but retains a copy of every relayed payload in
``HuntSession.stored_transcripts``.  The leakage attack operates on exactly
that store and nothing else.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

from .model import GatewayId, Token, VirtualThreatGroup

CTI_NAME = "cti"

PHASE_ORDER = ("init", "ranking", "insights", "publish", "done")


class Phase(str, Enum):
    INIT = "init"
    RANKING = "ranking"
    INSIGHTS = "insights"
    PUBLISH = "publish"
    DONE = "done"


class SessionError(Exception):
    pass


class DeadLetterError(SessionError):
    """Raised back to the sender when the recipient is unknown."""


@dataclass(frozen=True)
class ThreatCategorySeed:
    category_id: str
    seed_events: frozenset[Token]
    countermeasures: str


@dataclass(frozen=True)
class RelayRecord:
    seq: int
    sender: str
    receiver: str
    step: str
    payload: bytes

    def payload_sha256(self) -> str:
        return hashlib.sha256(self.payload).hexdigest()


@dataclass
class HuntSession:
    session_id: str
    participants: tuple[GatewayId, ...]
    categories: tuple[ThreatCategorySeed, ...]
    phase: Phase = Phase.INIT
    phase_history: list[str] = field(default_factory=list)
    stored_groups: tuple[VirtualThreatGroup, ...] = ()
    stored_transcripts: list[RelayRecord] = field(default_factory=list)
    stored_catalog: dict | None = None

    def pseudonyms(self) -> set[str]:
        return {gw.pseudonym for gw in self.participants}


def encode_payload(obj) -> bytes:
    """Canonical JSON bytes for a protocol message body."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def decode_payload(data: bytes):
    return json.loads(data.decode("utf-8"))


class CtiCoordinator:
    """In-process coordinator; one logical actor per run."""

    def __init__(self) -> None:
        self._seq = 0

    def initiate_hunt(
        self,
        session_id: str,
        categories: Iterable[ThreatCategorySeed],
        participants: Iterable[GatewayId],
    ) -> HuntSession:
        """Open a session and deliver the category seed catalog to everyone."""
        participants = tuple(participants)
        if len(participants) < 3:
            raise SessionError(f"need at least 3 participants, got {len(participants)}")
        pseudonyms = [gw.pseudonym for gw in participants]
        if len(set(pseudonyms)) != len(pseudonyms):
            raise SessionError("duplicate participant pseudonyms")
        session = HuntSession(session_id, participants, tuple(categories))
        session.phase_history.append(Phase.INIT.value)
        seed_payload = encode_payload(
            [
                {
                    "category": seed.category_id,
                    "seed_events": sorted(seed.seed_events),
                }
                for seed in session.categories
            ]
        )
        for gw in participants:
            self.relay(session, seed_payload, CTI_NAME, gw.pseudonym, "seed-catalog")
        return session

    def relay(
        self, session: HuntSession, payload: bytes, sender: str, receiver: str, step: str
    ) -> bytes:
        """Deliver a payload unmodified, keeping a copy (semi-honest behavior)."""
        known = session.pseudonyms() | {CTI_NAME}
        self._seq += 1
        if receiver not in known:
            session.stored_transcripts.append(
                RelayRecord(self._seq, sender, receiver, "dead-letter", payload)
            )
            raise DeadLetterError(f"unknown recipient {receiver!r}")
        session.stored_transcripts.append(RelayRecord(self._seq, sender, receiver, step, payload))
        return payload

    def advance_phase(self, session: HuntSession, phase: Phase) -> None:
        if PHASE_ORDER.index(phase.value) < PHASE_ORDER.index(session.phase.value):
            raise SessionError(f"phase cannot move backwards: {session.phase} -> {phase}")
        if phase != session.phase:
            session.phase = phase
            session.phase_history.append(phase.value)

    def store_groups(self, session: HuntSession, groups: Iterable[VirtualThreatGroup]) -> None:
        session.stored_groups = tuple(groups)

    def store_catalog(self, session: HuntSession, catalog: dict) -> None:
        session.stored_catalog = catalog

    def publish_catalog(self, session: HuntSession) -> dict:
        """The core-point catalog plus countermeasures, for download by members
        and prospective members."""
        if session.phase not in (Phase.PUBLISH, Phase.DONE):
            raise SessionError(f"catalog is not available in phase {session.phase.value!r}")
        if session.stored_catalog is None:
            raise SessionError("no catalog stored for this session")
        return session.stored_catalog


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------


def transcript_lines(session: HuntSession) -> list[str]:
    """One JSON object per relayed message; byte-stable across replays."""
    lines = []
    for rec in session.stored_transcripts:
        try:
            body = decode_payload(rec.payload)
        except (UnicodeDecodeError, json.JSONDecodeError):
            body = {"hex": rec.payload.hex()}
        lines.append(
            json.dumps(
                {
                    "seq": rec.seq,
                    "from": rec.sender,
                    "to": rec.receiver,
                    "step": rec.step,
                    "sha256": rec.payload_sha256(),
                    "payload": body,
                },
                sort_keys=True,
                separators=(",", ":"),
            )
        )
    return lines


def export_transcript(session: HuntSession, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in transcript_lines(session):
            fh.write(line)
            fh.write("\n")


def export_session(session: HuntSession, path, group_summary: Mapping | None = None) -> None:
    doc = {
        "session_id": session.session_id,
        "phase": session.phase.value,
        "phases": session.phase_history,
        "participants": sorted(session.pseudonyms()),
        "categories": [c.category_id for c in session.categories],
        "virtual_groups": group_summary if group_summary is not None else [],
        "relayed_messages": len(session.stored_transcripts),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")
