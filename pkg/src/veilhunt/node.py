"""Per-gateway state for a simulation run.

A node owns its raw log, policy, and key material; everything it shares
with other parties goes through the protocol modules as value messages.
The raw log and the policy's sensitive set never leave this object.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .crypto import BlindKeypair, CommutativeKey, generate_blind_keypair, generate_comm_key
from .model import EventLog, EventVector, GatewayId, SanitizedLog, TaxonomyTree, Token
from .sanitize import SanitizePolicy, sanitize
from .seeding import derive_rng
from .weighting import CorpusStats, build_event_vector


@dataclass
class GatewayNode:
    gid: GatewayId
    log: EventLog
    policy: SanitizePolicy
    sanitized: SanitizedLog | None = None
    vector: EventVector | None = None
    envelope_key: BlindKeypair | None = None
    comm_key: CommutativeKey | None = None
    owned_tags: set[int] = field(default_factory=set)

    def conceal_log(self, taxonomy: TaxonomyTree) -> SanitizedLog:
        self.sanitized = sanitize(self.log, taxonomy, self.policy)
        return self.sanitized

    def build_vector(self, stats: CorpusStats, base: str = "e") -> EventVector:
        assert self.sanitized is not None, "conceal_log must run first"
        self.vector = build_event_vector(self.sanitized, stats, base)
        return self.vector

    def shared_tokens(self) -> set[Token]:
        """The token set this gateway exposes to the pairwise intersection
        protocol: every distinct token of its event vector."""
        assert self.vector is not None, "build_vector must run first"
        return set(self.vector.tokens)

    def provision_keys(self, run_seed: int, key_bits: int, comm_prime: int) -> None:
        self.envelope_key = generate_blind_keypair(
            key_bits, derive_rng(run_seed, "envelope-key", self.gid.pseudonym)
        )
        self.comm_key = generate_comm_key(
            comm_prime, derive_rng(run_seed, "comm-key", self.gid.pseudonym)
        )

    def session_rng(self, run_seed: int, *labels: object) -> random.Random:
        return derive_rng(run_seed, self.gid.pseudonym, *labels)
