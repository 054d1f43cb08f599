"""Second-stage concealment: private distributed frequent-event mining inside
each virtual threat group, followed by real-group formation and refinement.

The mining aggregation runs in two anonymous rounds over a commutative
encryption ring.  Round one collects the union of every member's locally
frequent event sets (any set that is globally frequent must be locally
frequent somewhere, so the union loses nothing); round two collects exact
per-member support counts for every candidate, which makes the distributed
catalog identical to centralized mining over the pooled logs.  In both
rounds each member encrypts its items with its own key, the trusted node
adds a transport layer and shuffles, and items travel the ring in reverse
while each member strips only its own layer, so the trusted node reads
plaintext identifiers and counts it cannot attribute to anyone.

Event-set identifiers are digests of the sanitized (hypernym) forms; raw
sensitive tokens never enter this protocol.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .coordinator import CtiCoordinator, HuntSession, decode_payload, encode_payload
from .crypto import CommutativeKey, comm_decrypt, comm_encrypt, digest_int, hash_to_group
from .mining import FrequentEventSet, day_transactions, local_frequent_events, meets_support, set_closure
from .model import GatewayId, RealThreatGroup, Token, VirtualThreatGroup, encode_token, encode_token_set
from .node import GatewayNode
from .ranking import ProtocolAbort
from .seeding import derive_rng
from .weighting import CorpusStats, inverse_log_frequency

DEFAULT_MERGE_THRESHOLD = 1.0


def token_digest(token: Token) -> int:
    return digest_int(encode_token(token))


def set_digest(events: Iterable[Token]) -> int:
    return digest_int(encode_token_set(events))


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScoreBreakdown:
    positive_terms: float
    negative_terms: float

    @property
    def score(self) -> float:
        return self.positive_terms - self.negative_terms


def similarity_score(
    group_events: frozenset[Token],
    weights: Mapping[Token, float],
    rc_support: Mapping[Token, float],
    vc_support: Mapping[Token, float],
    global_tokens: frozenset[Token],
) -> ScoreBreakdown:
    """Score a log (given by its significance weights) against one group.

    Positive mass comes from globally frequent log tokens the group owns,
    weighted by how common they are among the group's members; negative mass
    from globally frequent log tokens the group does not own, weighted by
    their spread across the whole virtual group.
    """
    positive = 0.0
    negative = 0.0
    for token, weight in weights.items():
        if token not in global_tokens:
            continue
        if token in group_events:
            positive += weight * rc_support.get(token, 0.0)
        else:
            negative += weight * vc_support.get(token, 0.0)
    return ScoreBreakdown(positive, negative)


@dataclass
class GroupScoringContext:
    """Everything the trusted node knows for scoring: the global token
    universe, per-member containment and record counts over that universe,
    and the run's corpus statistics.  All of it is hypernym-level data."""

    global_tokens: frozenset[Token]
    containment: Mapping[GatewayId, frozenset[Token]]
    member_counts: Mapping[GatewayId, Mapping[Token, int]]
    member_records: Mapping[GatewayId, int]
    stats: CorpusStats
    log_base: str = "e"

    def vc_support(self) -> dict[Token, float]:
        total = len(self.containment)
        if total == 0:
            return {}
        return {
            tok: sum(1 for has in self.containment.values() if tok in has) / total
            for tok in sorted(self.global_tokens)
        }

    def rc_support(self, members: Iterable[GatewayId]) -> dict[Token, float]:
        members = list(members)
        if not members:
            return {}
        return {
            tok: sum(1 for gw in members if tok in self.containment.get(gw, frozenset())) / len(members)
            for tok in sorted(self.global_tokens)
        }

    def conceived_weights(self, members: Iterable[GatewayId]) -> dict[Token, float]:
        """TF x ILF of the single conceived log concatenating the members' logs,
        over the global token universe."""
        members = list(members)
        total = sum(self.member_records.get(gw, 0) for gw in members)
        if total == 0:
            return {}
        weights: dict[Token, float] = {}
        for tok in sorted(self.global_tokens):
            hits = sum(self.member_counts.get(gw, {}).get(tok, 0) for gw in members)
            if hits == 0:
                continue
            w = (hits / total) * inverse_log_frequency(self.stats, tok, self.log_base)
            if w > 0.0:
                weights[tok] = w
        return weights

    def score(self, group: RealThreatGroup, weights: Mapping[Token, float]) -> ScoreBreakdown:
        return similarity_score(
            group.events, weights, self.rc_support(group.members), self.vc_support(), self.global_tokens
        )

    def directed_similarity(self, target: RealThreatGroup, source: RealThreatGroup) -> float:
        """Score of the source group's conceived log against the target,
        normalized by the conceived log's weighted mass and shifted by +1
        (so 1.0 is neutral and values live in [0, 2])."""
        if not source.members:
            raise ProtocolAbort("conceived log of an empty group is undefined")
        weights = self.conceived_weights(source.members)
        mass = sum(weights.values())
        if mass == 0.0:
            return 1.0
        return self.score(target, weights).score / mass + 1.0

    def inter_similarity(self, a: RealThreatGroup, b: RealThreatGroup) -> float:
        return self.directed_similarity(a, b) * self.directed_similarity(b, a)


# ---------------------------------------------------------------------------
# Group initialization, assignment, hierarchy, merging
# ---------------------------------------------------------------------------


def recompute_core_point(
    events: frozenset[Token], members: frozenset[GatewayId], containment: Mapping[GatewayId, frozenset[Token]]
) -> Token:
    """Most frequent defining event across the members' logs (ties break on
    token order); with no members the smallest token stands in."""
    ordered = sorted(events)
    if not members:
        return ordered[0]
    return min(
        ordered,
        key=lambda tok: (
            -sum(1 for gw in members if tok in containment.get(gw, frozenset())),
            tok,
        ),
    )


def init_real_groups(
    catalog: Sequence[FrequentEventSet],
    containment: Mapping[GatewayId, frozenset[Token]],
) -> list[RealThreatGroup]:
    """One initial group per maximal run of catalog sets sharing a leading
    token under canonical order; members are the gateways holding every
    defining event.  Initial groups may overlap."""
    if not catalog:
        raise ProtocolAbort("cannot initialize groups from an empty catalog")
    singles = {next(iter(fs.events)): fs.global_support for fs in catalog if fs.size == 1}
    ordered = sorted(catalog, key=lambda fs: sorted(fs.events))
    groups = []
    for _, run in itertools.groupby(ordered, key=lambda fs: sorted(fs.events)[0]):
        events = frozenset().union(*(fs.events for fs in run))
        members = frozenset(
            gw for gw, has in containment.items() if events <= has
        )
        core = min(sorted(events), key=lambda tok: (-singles.get(tok, 0), tok))
        groups.append(RealThreatGroup(events, members, core, len(events)))
    return groups


def choose_group(
    weights: Mapping[Token, float],
    groups: Sequence[RealThreatGroup],
    rc_supports: Sequence[Mapping[Token, float]],
    vc_support: Mapping[Token, float],
    global_tokens: frozenset[Token],
) -> int:
    """Index of the argmax-score group for one gateway (ties prefer the
    smaller canonical identifier)."""
    if not groups:
        raise ProtocolAbort("no groups to choose from")
    scored = [
        (
            -similarity_score(g.events, weights, rc_supports[i], vc_support, global_tokens).score,
            g.canonical_id(),
            i,
        )
        for i, g in enumerate(groups)
    ]
    return min(scored)[2]


def assign_membership(
    groups: Sequence[RealThreatGroup],
    vectors: Mapping[GatewayId, Mapping[Token, float]],
    ctx: GroupScoringContext,
) -> list[RealThreatGroup]:
    """Give every gateway exactly one group (its argmax score) and recompute
    each group's core point from its new members.  Output groups have
    pairwise disjoint member sets; groups left without members stay in the
    list until merging prunes them."""
    rc_supports = [ctx.rc_support(g.members) for g in groups]
    vc_support = ctx.vc_support()
    chosen: dict[GatewayId, int] = {}
    for gw in sorted(vectors, key=lambda g: g.pseudonym):
        chosen[gw] = choose_group(vectors[gw], groups, rc_supports, vc_support, ctx.global_tokens)
    out = []
    for i, g in enumerate(groups):
        members = frozenset(gw for gw, pick in chosen.items() if pick == i)
        out.append(
            RealThreatGroup(
                g.events, members, recompute_core_point(g.events, members, ctx.containment), g.level
            )
        )
    return out


@dataclass
class HierarchyNode:
    group: RealThreatGroup
    parent: "HierarchyNode | None" = None
    children: list["HierarchyNode"] = field(default_factory=list)


def build_hierarchy(groups: Sequence[RealThreatGroup], ctx: GroupScoringContext) -> list[HierarchyNode]:
    """Attach each level-k group to the level-(k-1) group whose event set is
    contained in the child's and whose score against the child's conceived
    log is maximal.  Returns the roots."""
    nodes = [HierarchyNode(g) for g in sorted(groups, key=lambda g: g.canonical_id())]
    by_level: dict[int, list[HierarchyNode]] = {}
    for node in nodes:
        by_level.setdefault(node.group.level, []).append(node)
    for node in nodes:
        candidates = [
            parent
            for parent in by_level.get(node.group.level - 1, [])
            if parent.group.events < node.group.events
        ]
        if not candidates:
            continue
        if node.group.members:
            child_weights = ctx.conceived_weights(node.group.members)
        else:
            child_weights = {}
        best = min(
            candidates,
            key=lambda p: (-ctx.score(p.group, child_weights).score, p.group.canonical_id()),
        )
        node.parent = best
        best.children.append(node)
    return [node for node in nodes if node.parent is None]


def _sibling_sets(roots: list[HierarchyNode]) -> list[list[HierarchyNode]]:
    out = [roots]
    stack = list(roots)
    while stack:
        node = stack.pop()
        if node.children:
            out.append(node.children)
            stack.extend(node.children)
    return out


def merge_groups(
    groups: Sequence[RealThreatGroup],
    ctx: GroupScoringContext,
    merge_threshold: float = DEFAULT_MERGE_THRESHOLD,
    prune_lonely: bool = False,
) -> tuple[list[RealThreatGroup], bool]:
    """One merge pass: drop memberless groups, then merge sibling pairs whose
    two-way similarity product reaches the threshold (greedy, best first,
    each group merged at most once per pass).  Returns the new group list
    and whether anything changed.

    ``prune_lonely`` additionally drops singleton-member groups whose best
    sibling similarity falls below the threshold (off by default).
    """
    kept = [g for g in groups if g.members]
    changed = len(kept) != len(groups)

    # identical event sets cannot coexist (distinctness condition)
    by_events: dict[frozenset[Token], list[RealThreatGroup]] = {}
    for g in kept:
        by_events.setdefault(g.events, []).append(g)
    deduped = []
    for events, bucket in sorted(by_events.items(), key=lambda kv: sorted(kv[0])):
        if len(bucket) == 1:
            deduped.append(bucket[0])
        else:
            members = frozenset().union(*(g.members for g in bucket))
            deduped.append(
                RealThreatGroup(events, members, recompute_core_point(events, members, ctx.containment), len(events))
            )
            changed = True
    kept = deduped

    roots = build_hierarchy(kept, ctx)
    pairs: list[tuple[float, str, str, RealThreatGroup, RealThreatGroup]] = []
    for siblings in _sibling_sets(roots):
        for a, b in itertools.combinations(siblings, 2):
            if not (a.group.members and b.group.members):
                continue
            sim = ctx.inter_similarity(a.group, b.group)
            if sim >= merge_threshold:
                ia, ib = sorted((a.group.canonical_id(), b.group.canonical_id()))
                pairs.append((sim, ia, ib, a.group, b.group))

    pairs.sort(key=lambda p: (-p[0], p[1], p[2]))
    consumed: set[str] = set()
    merged: list[RealThreatGroup] = []
    for _, ia, ib, ga, gb in pairs:
        if ga.canonical_id() in consumed or gb.canonical_id() in consumed:
            continue
        consumed.add(ga.canonical_id())
        consumed.add(gb.canonical_id())
        events = ga.events | gb.events
        members = ga.members | gb.members
        merged.append(
            RealThreatGroup(events, members, recompute_core_point(events, members, ctx.containment), len(events))
        )
        changed = True

    survivors = [g for g in kept if g.canonical_id() not in consumed] + merged

    if prune_lonely:
        pruned = []
        for g in survivors:
            if len(g.members) == 1 and len(survivors) > 1:
                others = [o for o in survivors if o is not g and o.members]
                if others and max(ctx.inter_similarity(g, o) for o in others) < merge_threshold:
                    changed = True
                    continue
            pruned.append(g)
        survivors = pruned

    survivors.sort(key=lambda g: g.canonical_id())
    return survivors, changed


def merge_to_fixpoint(
    groups: Sequence[RealThreatGroup],
    ctx: GroupScoringContext,
    merge_threshold: float = DEFAULT_MERGE_THRESHOLD,
    prune_lonely: bool = False,
) -> list[RealThreatGroup]:
    current = list(groups)
    while True:
        current, changed = merge_groups(current, ctx, merge_threshold, prune_lonely)
        if not changed:
            return current


# ---------------------------------------------------------------------------
# Anonymous ring rounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RingItem:
    """One contribution traveling the ring: an owner-private tag, the
    encrypted cells (cell 0 is the event-set element, the rest are closure
    elements), and an optional plaintext support count."""

    tag: int
    cells: tuple[int, ...]
    count: int | None = None

    def map_cells(self, fn) -> "RingItem":
        return replace(self, cells=tuple(fn(c) for c in self.cells))

    def to_wire(self) -> dict:
        body = {"tag": self.tag, "cells": list(self.cells)}
        if self.count is not None:
            body["count"] = self.count
        return body

    @staticmethod
    def from_wire(body: dict) -> "RingItem":
        return RingItem(body["tag"], tuple(body["cells"]), body.get("count"))


def encrypt_item(item: RingItem, key: CommutativeKey) -> RingItem:
    return item.map_cells(lambda c: comm_encrypt(c, key))


def decrypt_item(item: RingItem, key: CommutativeKey) -> RingItem:
    return item.map_cells(lambda c: comm_decrypt(c, key))


def _relay_items(
    coordinator: CtiCoordinator | None,
    session: HuntSession | None,
    items: list[RingItem],
    sender: str,
    receiver: str,
    step: str,
) -> list[RingItem]:
    if coordinator is None or session is None:
        return items
    raw = coordinator.relay(session, encode_payload([i.to_wire() for i in items]), sender, receiver, step)
    return [RingItem.from_wire(b) for b in decode_payload(raw)]


def ring_collect(
    members: Sequence[GatewayNode],
    trusted: GatewayNode,
    items_of: Mapping[str, list[RingItem]],
    step: str,
    coordinator: CtiCoordinator | None = None,
    session: HuntSession | None = None,
) -> list[RingItem]:
    """Pass the accumulating bundle around the ring; every member appends its
    own already-encrypted items; the last member submits the lot to the
    trusted node.  Order-preserving; no member sees another's plaintext."""
    relay_chain = [m for m in members if m.gid != trusted.gid]
    bundle: list[RingItem] = []
    for pos, member in enumerate(relay_chain):
        bundle = bundle + items_of.get(member.gid.pseudonym, [])
        nxt = relay_chain[pos + 1].gid.pseudonym if pos + 1 < len(relay_chain) else trusted.gid.pseudonym
        bundle = _relay_items(coordinator, session, bundle, member.gid.pseudonym, nxt, step)
    return bundle + items_of.get(trusted.gid.pseudonym, [])


def peel_round(
    members: Sequence[GatewayNode],
    trusted: GatewayNode,
    bundle: list[RingItem],
    run_seed: int,
    step: str,
    coordinator: CtiCoordinator | None = None,
    session: HuntSession | None = None,
) -> list[RingItem]:
    """The trusted node wraps every cell in its own transport layer and sends
    the shuffled catalog around the ring in reverse; each member strips only
    its own contribution layer and reshuffles.  What returns carries only the
    transport layer, which the trusted node removes last."""
    assert trusted.comm_key is not None
    items = [encrypt_item(item, trusted.comm_key) for item in bundle]
    derive_rng(run_seed, "peel", step, trusted.gid.pseudonym).shuffle(items)

    chain = [m for m in members if m.gid != trusted.gid][::-1]
    sender = trusted.gid.pseudonym
    for pos, member in enumerate(chain):
        items = _relay_items(coordinator, session, items, sender, member.gid.pseudonym, step)
        assert member.comm_key is not None
        items = [
            decrypt_item(item, member.comm_key) if item.tag in member.owned_tags else item
            for item in items
        ]
        derive_rng(run_seed, "peel", step, member.gid.pseudonym).shuffle(items)
        sender = member.gid.pseudonym
    items = _relay_items(coordinator, session, items, sender, trusted.gid.pseudonym, step)

    out = []
    for item in items:
        item = decrypt_item(item, trusted.comm_key)  # transport layer
        if item.tag in trusted.owned_tags:
            item = decrypt_item(item, trusted.comm_key)  # own contribution layer
        out.append(item)
    return out


def build_set_resolver(tokens: Iterable[Token], max_size: int, prime: int) -> dict[int, frozenset[Token]]:
    """Group-element -> token-set lookup over the given public vocabulary."""
    resolver: dict[int, frozenset[Token]] = {}
    ordered = sorted(set(tokens))
    for size in range(1, max_size + 1):
        for combo in itertools.combinations(ordered, size):
            s = frozenset(combo)
            resolver[hash_to_group(encode_token_set(s), prime)] = s
    return resolver


def resolve_items(
    items: Sequence[RingItem],
    vocabulary: Iterable[Token],
    max_size: int,
    prime: int,
) -> list[tuple[frozenset[Token], int | None, frozenset[Token]]]:
    """Map peeled items back to (event set, count, closure tokens).

    Resolution runs in two stages: single tokens against the public
    vocabulary, then multi-token sets against combinations of the tokens
    actually seen.  An unresolvable cell means an encryption layer was never
    removed; the round aborts rather than emit a partial catalog.
    """
    vocab = sorted(set(vocabulary))
    single_resolver = {
        hash_to_group(encode_token_set({tok}), prime): frozenset({tok}) for tok in vocab
    }
    token_resolver = {hash_to_group(encode_token(tok), prime): tok for tok in vocab}

    active: set[Token] = set()
    for item in items:
        hit = single_resolver.get(item.cells[0])
        if hit:
            active |= hit
    full_resolver = dict(single_resolver)
    if max_size > 1 and active:
        full_resolver.update(
            {
                elem: s
                for elem, s in build_set_resolver(active, max_size, prime).items()
            }
        )

    out = []
    for item in items:
        events = full_resolver.get(item.cells[0])
        if events is None:
            raise ProtocolAbort("peel-off incomplete: unresolvable event-set element")
        closure = set(events)
        for cell in item.cells[1:]:
            tok = token_resolver.get(cell)
            if tok is None:
                raise ProtocolAbort("peel-off incomplete: unresolvable closure element")
            closure.add(tok)
        out.append((events, item.count, frozenset(closure)))
    return out


def aggregate_global(
    resolved: Sequence[tuple[frozenset[Token], int | None, frozenset[Token]]],
    total_transactions: int,
    min_support: float,
) -> list[FrequentEventSet]:
    """Sum unattributed counts per event set, intersect closures, and drop
    sets below the global support threshold."""
    supports: dict[frozenset[Token], int] = {}
    closures: dict[frozenset[Token], frozenset[Token]] = {}
    for events, count, closure in resolved:
        if count is None:
            raise ProtocolAbort("count round items must carry support counts")
        supports[events] = supports.get(events, 0) + count
        closures[events] = closures[events] & closure if events in closures else closure
    catalog = []
    for events in sorted(supports, key=lambda s: (len(s), sorted(s))):
        if meets_support(supports[events], total_transactions, min_support):
            catalog.append(
                FrequentEventSet(events, {}, supports[events], closures[events] | events)
            )
    return catalog


# ---------------------------------------------------------------------------
# Published catalog and enrollment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PublishedGroup:
    group_id: str
    events: tuple[Token, ...]
    core_point: Token
    level: int
    members: tuple[str, ...]
    rc_support: Mapping[Token, float]
    vc_support: Mapping[Token, float]
    parent_id: str | None = None
    countermeasures: str = ""

    def global_tokens(self) -> frozenset[Token]:
        return frozenset(self.vc_support) | frozenset(self.events)


@dataclass(frozen=True)
class PublishedCatalog:
    groups: tuple[PublishedGroup, ...]


def enroll_new_member(
    weights: Mapping[Token, float], catalog: PublishedCatalog
) -> tuple[list[tuple[str, float]], PublishedGroup]:
    """Rank every published group against a local event vector and pick the
    best.  Runs entirely on the joining gateway; nothing about the local log
    leaves it."""
    if not catalog.groups:
        raise ProtocolAbort("cannot enroll against an empty catalog")
    ranking = []
    for group in catalog.groups:
        breakdown = similarity_score(
            frozenset(group.events),
            weights,
            group.rc_support,
            group.vc_support,
            group.global_tokens(),
        )
        ranking.append((group.group_id, breakdown.score))
    ranking.sort(key=lambda pair: (-pair[1], pair[0]))
    chosen_id = ranking[0][0]
    chosen = next(g for g in catalog.groups if g.group_id == chosen_id)
    return ranking, chosen


# ---------------------------------------------------------------------------
# Round driver
# ---------------------------------------------------------------------------


@dataclass
class InsightsParams:
    min_support: float = 0.3
    min_closure: float = 0.5
    max_set_size: int = 3
    merge_threshold: float = DEFAULT_MERGE_THRESHOLD
    prune_lonely: bool = False
    log_base: str = "e"


@dataclass
class InsightsResult:
    vc: VirtualThreatGroup
    roots: list[HierarchyNode]
    catalog: list[FrequentEventSet]
    ctx: GroupScoringContext
    parent_ids: dict[str, str | None]


def _fresh_tag(node: GatewayNode, rng) -> int:
    tag = rng.getrandbits(128)
    node.owned_tags.add(tag)
    return tag


def run_insights_round(
    vc: VirtualThreatGroup,
    nodes: Mapping[str, GatewayNode],
    vocabulary: Iterable[Token],
    stats: CorpusStats,
    comm_prime: int,
    run_seed: int,
    params: InsightsParams,
    coordinator: CtiCoordinator | None = None,
    session: HuntSession | None = None,
) -> InsightsResult:
    """Run the full second-stage round for one virtual threat group."""
    member_ids = sorted(vc.members, key=lambda gw: gw.pseudonym)
    ring_rng = derive_rng(run_seed, "vc-ring", vc.trusted_node.pseudonym)
    ring_rng.shuffle(member_ids)
    members = [nodes[gw.pseudonym] for gw in member_ids]
    trusted = nodes[vc.trusted_node.pseudonym]
    vc_label = vc.trusted_node.pseudonym

    def send(payload, sender: str, receiver: str, step: str):
        if coordinator is None or session is None or sender == receiver:
            return payload
        raw = coordinator.relay(session, encode_payload(payload), sender, receiver, step)
        return decode_payload(raw)

    # The trusted node opens the round by distributing its own catalog of
    # 1-candidate frequent events (as sanitized-form digests).
    assert trusted.sanitized is not None
    trusted_singles = [
        fs
        for fs in local_frequent_events(
            trusted.sanitized, None, params.min_support, params.min_closure, 1
        )
    ]
    seed_payload = {"sets": sorted(set_digest(fs.events) for fs in trusted_singles)}
    for node in members:
        if node.gid != trusted.gid:
            send(seed_payload, trusted.gid.pseudonym, node.gid.pseudonym, "candidate-seed")

    # Each member mines its own log locally.
    local_sets: dict[str, list[FrequentEventSet]] = {}
    transactions_of: dict[str, list[frozenset[Token]]] = {}
    for node in members:
        assert node.sanitized is not None
        local_sets[node.gid.pseudonym] = local_frequent_events(
            node.sanitized, None, params.min_support, params.min_closure, params.max_set_size
        )
        transactions_of[node.gid.pseudonym] = day_transactions(node.sanitized)

    # Round one: anonymous union of locally frequent sets (candidates).
    items_r1: dict[str, list[RingItem]] = {}
    for node in members:
        rng = node.session_rng(run_seed, "tags", vc_label, "candidates")
        assert node.comm_key is not None
        items = []
        for fs in local_sets[node.gid.pseudonym]:
            item = RingItem(
                _fresh_tag(node, rng), (hash_to_group(encode_token_set(fs.events), comm_prime),)
            )
            items.append(encrypt_item(item, node.comm_key))
        items_r1[node.gid.pseudonym] = items
    bundle = ring_collect(members, trusted, items_r1, "mine-candidates", coordinator, session)
    peeled = peel_round(members, trusted, bundle, run_seed, "mine-candidates-peel", coordinator, session)
    resolved_r1 = resolve_items(peeled, vocabulary, params.max_set_size, comm_prime)
    candidate_sets = sorted(
        {events for events, _, _ in resolved_r1} | {fs.events for fs in trusted_singles},
        key=lambda s: (len(s), sorted(s)),
    )

    # The agreed candidate catalog goes back around (digest-only).
    candidates_payload = {"sets": sorted(set_digest(s) for s in candidate_sets)}
    for node in members:
        if node.gid != trusted.gid:
            send(candidates_payload, trusted.gid.pseudonym, node.gid.pseudonym, "candidates")
    candidate_digests = set(candidates_payload["sets"])

    # Round two: exact per-member counts and closures for every candidate.
    items_r2: dict[str, list[RingItem]] = {}
    total_transactions = 0
    for node in members:
        rng = node.session_rng(run_seed, "tags", vc_label, "counts")
        assert node.comm_key is not None
        transactions = transactions_of[node.gid.pseudonym]
        own_tokens = sorted({tok for t in transactions for tok in t})
        items = []
        for size in range(1, params.max_set_size + 1):
            for combo in itertools.combinations(own_tokens, size):
                s = frozenset(combo)
                if set_digest(s) not in candidate_digests:
                    continue
                count = sum(1 for t in transactions if s <= t)
                if count == 0:
                    continue
                closure = set_closure(s, transactions, params.min_closure)
                cells = (hash_to_group(encode_token_set(s), comm_prime),) + tuple(
                    hash_to_group(encode_token(tok), comm_prime) for tok in sorted(closure)
                )
                items.append(encrypt_item(RingItem(_fresh_tag(node, rng), cells, count), node.comm_key))
        items_r2[node.gid.pseudonym] = items
        total_transactions += len(transactions)
        send(
            {"transactions": len(transactions), "records": len(node.sanitized.records)},
            node.gid.pseudonym,
            trusted.gid.pseudonym,
            "txn-count",
        )
    bundle = ring_collect(members, trusted, items_r2, "mine-counts", coordinator, session)
    peeled = peel_round(members, trusted, bundle, run_seed, "mine-counts-peel", coordinator, session)
    resolved_r2 = resolve_items(peeled, vocabulary, params.max_set_size, comm_prime)
    catalog = aggregate_global(resolved_r2, total_transactions, params.min_support)

    if not catalog:
        empty_vc = VirtualThreatGroup((), vc.members, vc.trusted_node)
        ctx = GroupScoringContext(frozenset(), {}, {}, {}, stats, params.log_base)
        return InsightsResult(empty_vc, [], [], ctx, {})

    global_tokens = frozenset(tok for fs in catalog if fs.size == 1 for tok in fs.events)
    catalog_payload = {
        "sets": [{"id": set_digest(fs.events), "support": fs.global_support} for fs in catalog]
    }
    for node in members:
        if node.gid != trusted.gid:
            send(catalog_payload, trusted.gid.pseudonym, node.gid.pseudonym, "global-catalog")

    # Per-member record counts over the global tokens (hypernym-level stats).
    containment: dict[GatewayId, frozenset[Token]] = {}
    member_counts: dict[GatewayId, dict[Token, int]] = {}
    member_records: dict[GatewayId, int] = {}
    token_ids = {token_digest(tok): tok for tok in global_tokens}
    for node in members:
        assert node.sanitized is not None
        counts: dict[Token, int] = {}
        for rec in node.sanitized.records:
            if rec.event_id in global_tokens:
                counts[rec.event_id] = counts.get(rec.event_id, 0) + 1
        stats_payload = {
            "tokens": {str(token_digest(tok)): n for tok, n in sorted(counts.items())},
            "records": len(node.sanitized.records),
        }
        received = send(stats_payload, node.gid.pseudonym, trusted.gid.pseudonym, "token-stats")
        decoded = {token_ids[int(d)]: n for d, n in received["tokens"].items()}
        containment[node.gid] = frozenset(decoded)
        member_counts[node.gid] = decoded
        member_records[node.gid] = received["records"]

    ctx = GroupScoringContext(
        global_tokens, containment, member_counts, member_records, stats, params.log_base
    )

    initial = init_real_groups(catalog, containment)
    rc_supports = [ctx.rc_support(g.members) for g in initial]
    vc_support = ctx.vc_support()
    groups_payload = {
        "groups": [
            {
                "id": set_digest(g.events),
                "events": sorted(token_digest(tok) for tok in g.events),
                "rc_support": {str(token_digest(t)): rc_supports[i].get(t, 0.0) for t in sorted(ctx.global_tokens)},
            }
            for i, g in enumerate(initial)
        ],
        "vc_support": {str(token_digest(t)): vc_support.get(t, 0.0) for t in sorted(ctx.global_tokens)},
    }

    # Every member picks its group locally and announces only the choice.
    choices: dict[GatewayId, int] = {}
    id_to_index = {set_digest(g.events): i for i, g in enumerate(initial)}
    for node in members:
        send(groups_payload, trusted.gid.pseudonym, node.gid.pseudonym, "initial-groups")
        assert node.vector is not None
        pick = choose_group(
            dict(node.vector.weights), initial, rc_supports, vc_support, ctx.global_tokens
        )
        reply = send(
            {"group": set_digest(initial[pick].events)},
            node.gid.pseudonym,
            trusted.gid.pseudonym,
            "membership",
        )
        choices[node.gid] = id_to_index[reply["group"]]

    assigned = []
    for i, g in enumerate(initial):
        chosen_members = frozenset(gw for gw, pick in choices.items() if pick == i)
        assigned.append(
            RealThreatGroup(
                g.events,
                chosen_members,
                recompute_core_point(g.events, chosen_members, ctx.containment),
                g.level,
            )
        )

    final_groups = merge_to_fixpoint(assigned, ctx, params.merge_threshold, params.prune_lonely)
    roots = build_hierarchy(final_groups, ctx)
    parent_ids: dict[str, str | None] = {}

    def walk(node: HierarchyNode, parent: str | None) -> None:
        parent_ids[node.group.canonical_id()] = parent
        for child in node.children:
            walk(child, node.group.canonical_id())

    for root in roots:
        walk(root, None)

    vc_out = VirtualThreatGroup(tuple(final_groups), vc.members, vc.trusted_node)
    return InsightsResult(vc_out, roots, catalog, ctx, parent_ids)
