"""First-stage concealment: private pairwise intersection of hashed token
sets, trusted-node similarity aggregation, and seed-expansion clustering
into virtual threat groups.

Each unordered pair of gateways runs one blind-signature session: the
lower-ring-index party ("signer") creates a fresh RSA pair and signs, the
other ("requester") blinds its hashed tokens, unblinds the returned
signatures and intersects the digest sets.  Only digests, blinded values,
signed values, set sizes and pseudonyms ever cross a host boundary; the
requester seals the pair report to the trusted node, which assembles the
similarity matrix and clusters it.

The clustering here is a deterministic threshold seed-expansion: repeatedly
pick the unassigned gateway with the largest total similarity to the other
unassigned ones as a seed and attach everything within ``theta``.  It is a
documented stand-in for the unpublished reference algorithm and is kept
behind one function so it can be swapped out.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

from .coordinator import CtiCoordinator, HuntSession, decode_payload, encode_payload
from .crypto import (
    BlindKeypair,
    BlindPublicKey,
    Envelope,
    blind,
    digest_mod,
    envelope_open,
    envelope_seal,
    generate_blind_keypair,
    int_digest,
    make_blinding_factor,
    sign_value,
    unblind,
)
from .model import GatewayId, VirtualThreatGroup, encode_token
from .node import GatewayNode
from .seeding import derive_rng
from .weighting import classic_dice_from_counts, similarity_from_counts

DEFAULT_THETA = 0.15


class ProtocolAbort(Exception):
    """A protocol step received malformed data; no partial report is emitted."""


def pseudonym_digest(pseudonym: str) -> str:
    return hashlib.sha256(pseudonym.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Ring formation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RingTopology:
    order: tuple[GatewayId, ...]
    trusted_node: GatewayId


def elect_trusted_node(participants: Iterable[GatewayId]) -> GatewayId:
    """Deterministic, stateless election: smallest pseudonym digest wins."""
    return min(participants, key=lambda gw: pseudonym_digest(gw.pseudonym))


def form_ring(participants: Iterable[GatewayId], run_seed: int) -> RingTopology:
    members = sorted(set(participants), key=lambda gw: gw.pseudonym)
    if len(members) < 3:
        raise ProtocolAbort(f"ring formation needs at least 3 gateways, got {len(members)}")
    rng = derive_rng(run_seed, "ring-order")
    rng.shuffle(members)
    return RingTopology(tuple(members), elect_trusted_node(members))


# ---------------------------------------------------------------------------
# Pairwise private intersection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PsiTranscript:
    """Everything one pairwise session produced, for verification and audit."""

    signer: GatewayId
    requester: GatewayId
    blinded: tuple[int, ...]
    signed: tuple[int, ...]
    unblinded: tuple[int, ...]
    requester_digests: frozenset[int]
    signer_digests: frozenset[int]
    intersection: frozenset[int]
    size_signer: int
    size_requester: int

    def validate(self) -> None:
        if len(self.signed) != len(self.blinded):
            raise ProtocolAbort("signed sequence length differs from blinded sequence")
        if not (self.intersection <= self.signer_digests and self.intersection <= self.requester_digests):
            raise ProtocolAbort("intersection is not contained in both digest sets")
        if len(self.intersection) > min(self.size_signer, self.size_requester):
            raise ProtocolAbort("intersection larger than a participant's set")


def psi_session(
    signer: GatewayNode,
    requester: GatewayNode,
    run_seed: int,
    key_bits: int,
    coordinator: CtiCoordinator | None = None,
    session: HuntSession | None = None,
) -> PsiTranscript:
    """Run the six-step exchange for one gateway pair.

    A fresh signing pair is generated per session so the trusted node cannot
    correlate digests across pairs.  When a coordinator is given, every
    message is relayed (and therefore recorded) through it.
    """
    pair_label = f"{signer.gid.pseudonym}:{requester.gid.pseudonym}"
    rng_signer = derive_rng(run_seed, "psi", pair_label, "signer")
    rng_requester = derive_rng(run_seed, "psi", pair_label, "requester")

    def send(payload: dict, sender: GatewayNode, receiver: GatewayNode, step: str) -> dict:
        raw = encode_payload(payload)
        if coordinator is not None and session is not None:
            raw = coordinator.relay(session, raw, sender.gid.pseudonym, receiver.gid.pseudonym, step)
        return decode_payload(raw)

    # Signer generates a fresh keypair and shares the public half.
    key = generate_blind_keypair(key_bits, rng_signer)
    key_msg = send(
        {"modulus": key.modulus, "pub_exp": key.pub_exp}, signer, requester, "psi-key"
    )
    public = BlindPublicKey(key_msg["modulus"], key_msg["pub_exp"])

    # Requester hashes its tokens into the signer's group and blinds each one.
    requester_tokens = sorted(requester.shared_tokens())
    hashed = [digest_mod(encode_token(tok), public.modulus) for tok in requester_tokens]
    factors = [make_blinding_factor(public.modulus, rng_requester) for _ in hashed]
    blinded_values = [blind(m, public, f) for m, f in zip(hashed, factors)]
    blind_msg = send({"values": blinded_values}, requester, signer, "psi-blinded")

    # Signer signs blindly, returning values in the order received.
    signed_values = [sign_value(v, key) for v in blind_msg["values"]]
    signed_msg = send({"values": signed_values}, signer, requester, "psi-signed")
    if len(signed_msg["values"]) != len(blinded_values):
        raise ProtocolAbort("signer returned a different number of values than it received")

    # Requester strips its blinding to expose real signatures, then digests them.
    unblinded_values = [
        unblind(s, f, public.modulus) for s, f in zip(signed_msg["values"], factors)
    ]
    requester_digests = frozenset(int_digest(v) for v in unblinded_values)

    # Signer signs its own hashed set and publishes only the digests.
    signer_tokens = sorted(signer.shared_tokens())
    signer_sigs = [
        sign_value(digest_mod(encode_token(tok), key.modulus), key) for tok in signer_tokens
    ]
    signer_digest_msg = send(
        {"digests": sorted(int_digest(v) for v in signer_sigs)}, signer, requester, "psi-signer-digests"
    )
    signer_digests = frozenset(signer_digest_msg["digests"])

    intersection = signer_digests & requester_digests
    transcript = PsiTranscript(
        signer=signer.gid,
        requester=requester.gid,
        blinded=tuple(blinded_values),
        signed=tuple(signed_values),
        unblinded=tuple(unblinded_values),
        requester_digests=requester_digests,
        signer_digests=signer_digests,
        intersection=frozenset(intersection),
        size_signer=len(signer_digests),
        size_requester=len(requester_digests),
    )
    transcript.validate()
    return transcript


def submit_report(
    requester: GatewayNode,
    transcript: PsiTranscript,
    trusted: GatewayId,
    trusted_key: BlindPublicKey,
    rng: random.Random,
) -> Envelope:
    """Seal the pair result for the trusted node: hashed intersection set,
    both set sizes, and the pair's pseudonyms, nothing else."""
    transcript.validate()
    if requester.gid != transcript.requester:
        raise ProtocolAbort("only the requester side submits the pair report")
    payload = encode_payload(
        {
            "pair": [transcript.signer.pseudonym, transcript.requester.pseudonym],
            "intersection": sorted(int_digest(v) for v in transcript.intersection),
            "size_signer": transcript.size_signer,
            "size_requester": transcript.size_requester,
        }
    )
    return envelope_seal(payload, trusted, trusted_key, rng)


# ---------------------------------------------------------------------------
# Trusted-node aggregation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimilarityMatrix:
    order: tuple[str, ...]  # pseudonyms
    values: tuple[tuple[float, ...], ...]
    sizes: tuple[int, ...]

    def index(self, pseudonym: str) -> int:
        return self.order.index(pseudonym)

    def similarity(self, a: str, b: str) -> float:
        return self.values[self.index(a)][self.index(b)]


def aggregate_similarities(
    reports: Sequence[Envelope],
    trusted_keypair: BlindKeypair,
    participants: Sequence[GatewayId],
    classic: bool = False,
) -> SimilarityMatrix:
    """Open every pair report and build the symmetric similarity matrix.

    Exactly one report per unordered pair is required; the diagonal is the
    self-similarity 2|V| / 2|V|^2 = 1/|V|.  ``classic`` switches the cell
    formula to the classical Dice coefficient.
    """
    order = tuple(sorted(gw.pseudonym for gw in participants))
    index = {p: i for i, p in enumerate(order)}
    n = len(order)
    raw: dict[tuple[int, int], tuple[int, int, int]] = {}
    sizes: dict[int, int] = {}
    for env in reports:
        body = decode_payload(envelope_open(env, trusted_keypair))
        a, b = body["pair"]
        if a not in index or b not in index:
            raise ProtocolAbort(f"report names unknown gateways: {a}, {b}")
        i, j = sorted((index[a], index[b]))
        if (i, j) in raw:
            raise ProtocolAbort(f"duplicate report for pair {order[i]}, {order[j]}")
        size_i, size_j = (
            (body["size_signer"], body["size_requester"])
            if index[a] < index[b]
            else (body["size_requester"], body["size_signer"])
        )
        raw[(i, j)] = (len(body["intersection"]), size_i, size_j)
        sizes[i] = size_i
        sizes[j] = size_j
    missing = [
        (order[i], order[j]) for i in range(n) for j in range(i + 1, n) if (i, j) not in raw
    ]
    if missing:
        raise ProtocolAbort(f"missing pair reports: {missing}")

    formula = classic_dice_from_counts if classic else similarity_from_counts
    values = [[0.0] * n for _ in range(n)]
    for (i, j), (shared, size_i, size_j) in raw.items():
        sim = formula(shared, size_i, size_j)
        values[i][j] = sim
        values[j][i] = sim
    for i in range(n):
        values[i][i] = formula(sizes[i], sizes[i], sizes[i]) if sizes.get(i) else 0.0
    return SimilarityMatrix(order, tuple(tuple(row) for row in values), tuple(sizes.get(i, 0) for i in range(n)))


# ---------------------------------------------------------------------------
# Seed-expansion clustering
# ---------------------------------------------------------------------------


def s_seeds_cluster(
    matrix: SimilarityMatrix,
    participants: Sequence[GatewayId],
    theta: float = DEFAULT_THETA,
    max_groups: int | None = None,
) -> list[VirtualThreatGroup]:
    """Deterministic partition of the gateways by threshold seed expansion.

    Seeds are chosen by maximal total similarity to the still-unassigned
    gateways (ties broken by smaller pseudonym digest); each seed absorbs
    every unassigned gateway with similarity >= theta.  If ``max_groups``
    caps the seed count, leftovers join their most similar existing seed.
    """
    if theta <= 0:
        raise ProtocolAbort("theta must be positive")
    by_pseudonym = {gw.pseudonym: gw for gw in participants}
    if not matrix.order:
        return []

    unassigned = list(matrix.order)
    clusters: list[tuple[str, list[str]]] = []  # (seed, members)

    while unassigned and (max_groups is None or len(clusters) < max_groups):
        best = min(
            unassigned,
            key=lambda p: (
                -sum(matrix.similarity(p, q) for q in unassigned if q != p),
                pseudonym_digest(p),
            ),
        )
        members = [best] + [
            q for q in unassigned if q != best and matrix.similarity(best, q) >= theta
        ]
        for m in members:
            unassigned.remove(m)
        clusters.append((best, members))

    for leftover in list(unassigned):
        seed, members = min(
            clusters,
            key=lambda c: (-matrix.similarity(c[0], leftover), pseudonym_digest(c[0])),
        )
        members.append(leftover)

    groups = []
    for _, members in clusters:
        ids = frozenset(by_pseudonym[p] for p in members)
        groups.append(VirtualThreatGroup((), ids, elect_trusted_node(ids)))
    return groups
