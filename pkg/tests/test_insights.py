import math
import random

import pytest

from veilhunt.coordinator import CtiCoordinator
from veilhunt.crypto import generate_comm_key, generate_shared_prime, hash_to_group
from veilhunt.insights import (
    GroupScoringContext,
    InsightsParams,
    PublishedCatalog,
    PublishedGroup,
    RingItem,
    aggregate_global,
    assign_membership,
    build_hierarchy,
    choose_group,
    encrypt_item,
    enroll_new_member,
    init_real_groups,
    merge_groups,
    merge_to_fixpoint,
    peel_round,
    resolve_items,
    ring_collect,
    run_insights_round,
    similarity_score,
)
from veilhunt.mining import FrequentEventSet
from veilhunt.model import (
    Event,
    EventLog,
    RealThreatGroup,
    SanitizedLog,
    VirtualThreatGroup,
    encode_token_set,
    groups_are_disjoint,
)
from veilhunt.node import GatewayNode
from veilhunt.ranking import ProtocolAbort
from veilhunt.sanitize import SanitizePolicy
from veilhunt.weighting import CorpusStats

from .conftest import make_gateway
from .test_mining import brute_force_frequent

LN2 = math.log(2)


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------


def test_similarity_score_hand_fixture():
    # 0.5*0.8 + 0.3*0.6 - 0.2*0.4 = 0.50, computed by hand beforehand
    breakdown = similarity_score(
        group_events=frozenset({"a", "b"}),
        weights={"a": 0.5, "b": 0.3, "c": 0.2},
        rc_support={"a": 0.8, "b": 0.6},
        vc_support={"c": 0.4},
        global_tokens=frozenset({"a", "b", "c"}),
    )
    assert breakdown.positive_terms == pytest.approx(0.58)
    assert breakdown.negative_terms == pytest.approx(0.08)
    assert breakdown.score == pytest.approx(0.50)


def test_similarity_score_unrelated_log_is_zero():
    breakdown = similarity_score(
        frozenset({"a"}), {"z": 1.0}, {"a": 1.0}, {}, frozenset({"a"})
    )
    assert breakdown.score == 0.0


def test_similarity_score_all_group_frequent():
    breakdown = similarity_score(
        frozenset({"a", "b"}),
        {"a": 0.7, "b": 0.3},
        {"a": 1.0, "b": 0.5},
        {"a": 1.0, "b": 1.0},
        frozenset({"a", "b"}),
    )
    assert breakdown.negative_terms == 0.0
    assert breakdown.score == pytest.approx(0.7 + 0.15)


# ---------------------------------------------------------------------------
# Group initialization
# ---------------------------------------------------------------------------


def catalog_entry(events, support):
    return FrequentEventSet(frozenset(events), {}, support, frozenset(events))


def test_init_groups_single_entry():
    g0 = make_gateway(0)
    groups = init_real_groups([catalog_entry({"a"}, 5)], {g0: frozenset({"a"})})
    assert len(groups) == 1
    assert groups[0].events == frozenset({"a"})
    assert groups[0].core_point == "a"
    assert groups[0].members == frozenset({g0})
    assert groups[0].level == 1


def test_init_groups_five_gateway_fixture():
    # Hand enumeration: sorted catalog [a],[a,b],[b],[c],[c,d],[d] gives runs
    # a->{a,b}, b->{b}, c->{c,d}, d->{d}; cores by max single support.
    catalog = [
        catalog_entry({"a"}, 10),
        catalog_entry({"a", "b"}, 6),
        catalog_entry({"b"}, 8),
        catalog_entry({"c"}, 5),
        catalog_entry({"c", "d"}, 4),
        catalog_entry({"d"}, 6),
    ]
    g = [make_gateway(i) for i in range(5)]
    containment = {
        g[0]: frozenset({"a", "b", "c"}),
        g[1]: frozenset({"a", "b"}),
        g[2]: frozenset({"b", "c", "d"}),
        g[3]: frozenset({"c", "d"}),
        g[4]: frozenset({"a", "d"}),
    }
    groups = init_real_groups(catalog, containment)
    by_events = {gr.events: gr for gr in groups}
    assert set(by_events) == {
        frozenset({"a", "b"}),
        frozenset({"b"}),
        frozenset({"c", "d"}),
        frozenset({"d"}),
    }
    assert by_events[frozenset({"a", "b"})].members == frozenset({g[0], g[1]})
    assert by_events[frozenset({"a", "b"})].core_point == "a"  # support 10 beats 8
    assert by_events[frozenset({"b"})].members == frozenset({g[0], g[1], g[2]})
    assert by_events[frozenset({"c", "d"})].members == frozenset({g[2], g[3]})
    assert by_events[frozenset({"c", "d"})].core_point == "d"  # support 6 beats 5
    assert by_events[frozenset({"d"})].members == frozenset({g[2], g[3], g[4]})


def test_init_groups_empty_catalog_is_error():
    with pytest.raises(ProtocolAbort):
        init_real_groups([], {})


def test_initial_membership_is_definitional():
    catalog = [catalog_entry({"a"}, 3), catalog_entry({"a", "b"}, 2)]
    g = [make_gateway(i) for i in range(3)]
    containment = {
        g[0]: frozenset({"a", "b"}),
        g[1]: frozenset({"a"}),
        g[2]: frozenset({"b"}),
    }
    (group,) = init_real_groups(catalog, containment)
    for gw, has in containment.items():
        assert (gw in group.members) == (group.events <= has)


# ---------------------------------------------------------------------------
# Assignment
# ---------------------------------------------------------------------------


def two_topic_ctx():
    g = [make_gateway(i) for i in range(4)]
    global_tokens = frozenset({"x1", "x2", "y1", "y2"})
    containment = {
        g[0]: frozenset({"x1", "x2"}),
        g[1]: frozenset({"x1", "x2"}),
        g[2]: frozenset({"y1", "y2"}),
        g[3]: frozenset({"y1", "y2"}),
    }
    counts = {
        g[0]: {"x1": 5, "x2": 5},
        g[1]: {"x1": 6, "x2": 4},
        g[2]: {"y1": 5, "y2": 5},
        g[3]: {"y1": 3, "y2": 7},
    }
    records = {gw: sum(c.values()) for gw, c in counts.items()}
    stats = CorpusStats(4, {"x1": 2, "x2": 2, "y1": 2, "y2": 2})
    ctx = GroupScoringContext(global_tokens, containment, counts, records, stats)
    vectors = {
        g[0]: {"x1": 0.5 * LN2, "x2": 0.5 * LN2},
        g[1]: {"x1": 0.6 * LN2, "x2": 0.4 * LN2},
        g[2]: {"y1": 0.5 * LN2, "y2": 0.5 * LN2},
        g[3]: {"y1": 0.3 * LN2, "y2": 0.7 * LN2},
    }
    groups = [
        RealThreatGroup(frozenset({"x1", "x2"}), frozenset({g[0], g[1]}), "x1", 2),
        RealThreatGroup(frozenset({"y1", "y2"}), frozenset({g[2], g[3]}), "y1", 2),
    ]
    return g, ctx, vectors, groups


def test_assign_recovers_planted_topics():
    g, ctx, vectors, groups = two_topic_ctx()
    assigned = assign_membership(groups, vectors, ctx)
    by_events = {gr.events: gr for gr in assigned}
    assert by_events[frozenset({"x1", "x2"})].members == frozenset({g[0], g[1]})
    assert by_events[frozenset({"y1", "y2"})].members == frozenset({g[2], g[3]})
    vc = VirtualThreatGroup(tuple(assigned), frozenset(g), g[0])
    assert groups_are_disjoint(vc)


def test_assign_single_group_takes_everyone():
    g, ctx, vectors, _ = two_topic_ctx()
    only = [RealThreatGroup(frozenset({"x1"}), frozenset({g[0]}), "x1", 1)]
    assigned = assign_membership(only, vectors, ctx)
    assert assigned[0].members == frozenset(g)


def test_choice_invariant_under_weight_scaling():
    g, ctx, vectors, groups = two_topic_ctx()
    rc_supports = [ctx.rc_support(gr.members) for gr in groups]
    vc_support = ctx.vc_support()
    for gw in g:
        base = choose_group(vectors[gw], groups, rc_supports, vc_support, ctx.global_tokens)
        scaled = {t: 7.3 * w for t, w in vectors[gw].items()}
        assert choose_group(scaled, groups, rc_supports, vc_support, ctx.global_tokens) == base


# ---------------------------------------------------------------------------
# Hierarchy
# ---------------------------------------------------------------------------


def test_single_group_is_single_root():
    _, ctx, _, groups = two_topic_ctx()
    roots = build_hierarchy(groups[:1], ctx)
    assert len(roots) == 1
    assert roots[0].children == []


def test_subset_parent_is_linked():
    g, ctx, _, _ = two_topic_ctx()
    parent = RealThreatGroup(frozenset({"x1"}), frozenset({g[0]}), "x1", 1)
    child = RealThreatGroup(frozenset({"x1", "x2"}), frozenset({g[1]}), "x1", 2)
    roots = build_hierarchy([parent, child], ctx)
    assert len(roots) == 1
    assert roots[0].group == parent
    assert roots[0].children[0].group == child


def test_parent_nominee_is_score_argmax():
    g, ctx, _, _ = two_topic_ctx()
    child = RealThreatGroup(frozenset({"x1", "x2"}), frozenset({g[0], g[1]}), "x1", 2)
    candidates = [
        RealThreatGroup(frozenset({"x1"}), frozenset({g[0], g[1]}), "x1", 1),
        RealThreatGroup(frozenset({"x2"}), frozenset({g[1]}), "x2", 1),
        RealThreatGroup(frozenset({"y1"}), frozenset({g[2]}), "y1", 1),
    ]
    roots = build_hierarchy(candidates + [child], ctx)
    child_weights = ctx.conceived_weights(child.members)
    scores = [ctx.score(c, child_weights).score for c in candidates[:2]]  # y1 is no subset
    expected_parent = candidates[0] if scores[0] >= scores[1] else candidates[1]
    child_node = next(
        n for root in roots for n in ([root] + root.children) if n.group == child
    )
    assert child_node.parent is not None
    assert child_node.parent.group == expected_parent
    # verify by direct evaluation that the chosen parent's score is maximal
    assert ctx.score(child_node.parent.group, child_weights).score == pytest.approx(max(scores))


def test_hierarchy_chain_increases_one_event_per_level():
    g, ctx, _, _ = two_topic_ctx()
    chain = [
        RealThreatGroup(frozenset({"x1"}), frozenset({g[0]}), "x1", 1),
        RealThreatGroup(frozenset({"x1", "x2"}), frozenset({g[1]}), "x1", 2),
        RealThreatGroup(frozenset({"x1", "x2", "y1"}), frozenset({g[2]}), "x1", 3),
    ]
    roots = build_hierarchy(chain, ctx)
    assert len(roots) == 1
    node = roots[0]
    while node.children:
        (child,) = node.children
        assert node.group.events < child.group.events
        assert len(child.group.events) == len(node.group.events) + 1
        node = child


# ---------------------------------------------------------------------------
# Inter-group similarity and merging
# ---------------------------------------------------------------------------


def disjoint_pair_ctx():
    """Two singleton groups with fully disjoint tokens; every value below is
    reproducible by hand: each directed similarity is 1 - (ln2 * 1/2)/ln2 = 0.5."""
    g0, g1 = make_gateway(0), make_gateway(1)
    global_tokens = frozenset({"a", "b"})
    containment = {g0: frozenset({"a"}), g1: frozenset({"b"})}
    counts = {g0: {"a": 2}, g1: {"b": 3}}
    records = {g0: 2, g1: 3}
    stats = CorpusStats(2, {"a": 1, "b": 1})
    ctx = GroupScoringContext(global_tokens, containment, counts, records, stats)
    rc_a = RealThreatGroup(frozenset({"a"}), frozenset({g0}), "a", 1)
    rc_b = RealThreatGroup(frozenset({"b"}), frozenset({g1}), "b", 1)
    return ctx, rc_a, rc_b


def test_inter_similarity_hand_fixture():
    ctx, rc_a, rc_b = disjoint_pair_ctx()
    assert ctx.directed_similarity(rc_a, rc_b) == pytest.approx(0.5)
    assert ctx.directed_similarity(rc_b, rc_a) == pytest.approx(0.5)
    assert ctx.inter_similarity(rc_a, rc_b) == pytest.approx(0.25)
    # disjoint, all-VC-frequent source: directed value must fall below neutral 1
    assert ctx.directed_similarity(rc_a, rc_b) < 1.0


def test_identical_singleton_groups_square():
    g0 = make_gateway(0)
    ctx = GroupScoringContext(
        frozenset({"a"}),
        {g0: frozenset({"a"})},
        {g0: {"a": 4}},
        {g0: 4},
        CorpusStats(2, {"a": 1}),
    )
    rc = RealThreatGroup(frozenset({"a"}), frozenset({g0}), "a", 1)
    d = ctx.directed_similarity(rc, rc)
    assert ctx.inter_similarity(rc, rc) == pytest.approx(d * d)


def test_merge_threshold_above_everything_keeps_forest():
    ctx, rc_a, rc_b = disjoint_pair_ctx()
    merged, changed = merge_groups([rc_a, rc_b], ctx, merge_threshold=3.9)
    assert not changed
    assert set(merged) == {rc_a, rc_b}


def test_merge_unions_members_disjointly():
    g0, g1 = make_gateway(0), make_gateway(1)
    global_tokens = frozenset({"a", "b"})
    containment = {g0: frozenset({"a", "b"}), g1: frozenset({"a", "b"})}
    counts = {g0: {"a": 2, "b": 2}, g1: {"a": 3, "b": 3}}
    ctx = GroupScoringContext(
        global_tokens, containment, counts, {g0: 4, g1: 6}, CorpusStats(3, {"a": 1, "b": 1})
    )
    rc_a = RealThreatGroup(frozenset({"a"}), frozenset({g0}), "a", 1)
    rc_b = RealThreatGroup(frozenset({"b"}), frozenset({g1}), "b", 1)
    merged, changed = merge_groups([rc_a, rc_b], ctx, merge_threshold=1.0)
    assert changed
    assert len(merged) == 1
    assert merged[0].members == frozenset({g0, g1})
    assert len(merged[0].members) == len(rc_a.members) + len(rc_b.members)
    assert merged[0].events == frozenset({"a", "b"})
    assert merged[0].level == 2


def test_merge_drops_memberless_groups():
    ctx, rc_a, rc_b = disjoint_pair_ctx()
    empty = RealThreatGroup(frozenset({"a", "b"}), frozenset(), "a", 2)
    merged, changed = merge_groups([rc_a, rc_b, empty], ctx, merge_threshold=3.9)
    assert changed
    assert empty not in merged


def test_merge_reaches_fixpoint_quickly():
    rng = random.Random(53)
    for _ in range(10):
        n = rng.randrange(2, 6)
        gws = [make_gateway(i) for i in range(n)]
        tokens = [f"t{i}" for i in range(n)]
        containment = {gw: frozenset(tokens) for gw in gws}
        counts = {gw: {t: rng.randrange(1, 5) for t in tokens} for gw in gws}
        records = {gw: sum(c.values()) for gw, c in counts.items()}
        ctx = GroupScoringContext(
            frozenset(tokens), containment, counts, records, CorpusStats(n + 1, {t: 1 for t in tokens})
        )
        groups = [
            RealThreatGroup(frozenset({tokens[i]}), frozenset({gws[i]}), tokens[i], 1)
            for i in range(n)
        ]
        merges = 0
        current = groups
        while True:
            current, changed = merge_groups(current, ctx, merge_threshold=1.0)
            if not changed:
                break
            merges += 1
        assert merges <= n - 1
        final = merge_to_fixpoint(groups, ctx, merge_threshold=1.0)
        assert {g.events for g in final} == {g.events for g in current}


# ---------------------------------------------------------------------------
# Ring rounds
# ---------------------------------------------------------------------------


def make_ring_nodes(n, seed=97):
    rng = random.Random(seed)
    prime = generate_shared_prime(256, rng)
    nodes = []
    for i in range(n):
        gw = make_gateway(i)
        node = GatewayNode(gw, EventLog(gw, ()), SanitizePolicy(frozenset()))
        node.comm_key = generate_comm_key(prime, rng)
        nodes.append(node)
    return nodes, prime


def test_ring_collect_counts_and_order():
    nodes, prime = make_ring_nodes(4)
    items_of = {}
    for i, node in enumerate(nodes):
        item = RingItem(1000 + i, (hash_to_group(encode_token_set({f"t{i}"}), prime),))
        node.owned_tags.add(item.tag)
        items_of[node.gid.pseudonym] = [encrypt_item(item, node.comm_key)]
    bundle = ring_collect(nodes, nodes[0], items_of, "collect")
    assert len(bundle) == 4
    # order-preserving: relay chain first (nodes 1..3), trusted's own last
    assert [item.tag for item in bundle] == [1001, 1002, 1003, 1000]


def test_peel_recovers_plaintext_unattributably():
    nodes, prime = make_ring_nodes(4)
    tokens = ["alpha", "beta", "gamma", "delta"]
    items_of = {}
    rng = random.Random(5)
    for node, tok in zip(nodes, tokens):
        item = RingItem(rng.getrandbits(64), (hash_to_group(encode_token_set({tok}), prime),))
        node.owned_tags.add(item.tag)
        items_of[node.gid.pseudonym] = [encrypt_item(item, node.comm_key)]
    bundle = ring_collect(nodes, nodes[0], items_of, "collect")
    peeled = peel_round(nodes, nodes[0], bundle, run_seed=7, step="peel")
    resolved = resolve_items(peeled, tokens, 1, prime)
    assert {tuple(sorted(events))[0] for events, _, _ in resolved} == set(tokens)


def test_peel_aborts_when_layer_remains():
    nodes, prime = make_ring_nodes(3)
    item = RingItem(1, (hash_to_group(encode_token_set({"alpha"}), prime),))
    # the owner never registers the tag, so its layer is never stripped
    encrypted = encrypt_item(item, nodes[1].comm_key)
    bundle = ring_collect(nodes, nodes[0], {nodes[1].gid.pseudonym: [encrypted]}, "collect")
    peeled = peel_round(nodes, nodes[0], bundle, run_seed=7, step="peel")
    with pytest.raises(ProtocolAbort):
        resolve_items(peeled, ["alpha"], 1, prime)


def test_aggregate_global_sums_and_intersects():
    resolved = [
        (frozenset({"a"}), 3, frozenset({"a", "b"})),
        (frozenset({"a"}), 2, frozenset({"a", "c"})),
        (frozenset({"a"}), 0, frozenset({"a"})),
        (frozenset({"b"}), 1, frozenset({"b"})),
    ]
    catalog = aggregate_global(resolved, total_transactions=10, min_support=0.3)
    assert len(catalog) == 1
    entry = catalog[0]
    assert entry.events == frozenset({"a"})
    assert entry.global_support == 5  # supports {3, 2, 0} -> 5
    assert entry.closure == frozenset({"a"})


def test_aggregate_single_member_is_identity():
    resolved = [(frozenset({"a"}), 4, frozenset({"a", "b"}))]
    catalog = aggregate_global(resolved, total_transactions=5, min_support=0.5)
    assert catalog[0].global_support == 4
    assert catalog[0].closure == frozenset({"a", "b"})


# ---------------------------------------------------------------------------
# Full round against the pooled-mining oracle
# ---------------------------------------------------------------------------


def build_vc_fixture(day_sets_per_gateway, seed=131):
    """Gateway nodes whose sanitized logs realize the given per-day token sets."""
    rng = random.Random(seed)
    prime = generate_shared_prime(256, rng)
    nodes = {}
    gws = []
    logs = []
    for i, day_sets in enumerate(day_sets_per_gateway):
        gw = make_gateway(i)
        records = []
        for day, tokens in enumerate(day_sets):
            for j, tok in enumerate(sorted(tokens)):
                records.append(Event(tok, "dev", day * 86400 + j))
        log = EventLog(gw, tuple(records))
        san = SanitizedLog(gw, log.records, 0)
        node = GatewayNode(gw, log, SanitizePolicy(frozenset()))
        node.sanitized = san
        node.comm_key = generate_comm_key(prime, rng)
        gws.append(gw)
        logs.append(san)
        nodes[gw.pseudonym] = node
    from veilhunt.weighting import build_corpus_stats, build_event_vector

    stats = build_corpus_stats(logs)
    for node in nodes.values():
        node.vector = build_event_vector(node.sanitized, stats)
    vc = VirtualThreatGroup((), frozenset(gws), gws[0])
    return vc, nodes, stats, prime


def pooled_oracle(day_sets_per_gateway, min_support, max_size):
    pooled = [t for day_sets in day_sets_per_gateway for t in day_sets]
    return brute_force_frequent(pooled, min_support, 1.0, max_size)


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_distributed_equals_centralized(seed):
    rng = random.Random(400 + seed)
    vocab = [f"t{i:02d}" for i in range(15)]
    day_sets_per_gateway = [
        [set(rng.sample(vocab, rng.randrange(2, 7))) for _ in range(rng.randrange(2, 6))]
        for _ in range(5)
    ]
    vc, nodes, stats, prime = build_vc_fixture(day_sets_per_gateway, seed=seed)
    params = InsightsParams(min_support=0.3, min_closure=1.0, max_set_size=3)
    result = run_insights_round(vc, nodes, vocab, stats, prime, 900 + seed, params)
    got = {fs.events: fs.global_support for fs in result.catalog}
    expected = {
        events: count
        for events, (count, _) in pooled_oracle(day_sets_per_gateway, 0.3, 3).items()
    }
    assert got == expected

    # every global closure is contained in each contributing member's local closure
    from veilhunt.mining import set_closure

    for fs in result.catalog:
        for day_sets in day_sets_per_gateway:
            transactions = [frozenset(t) for t in day_sets]
            if any(fs.events <= t for t in transactions):
                local = set_closure(fs.events, transactions, 1.0)
                assert fs.closure <= local


def test_round_messages_hide_tokens_and_outputs_are_disjoint(taxonomy):
    day_sets = [
        [{"camera", "lock"}, {"camera"}],
        [{"camera", "lock"}, {"camera", "lock"}],
        [{"thermo"}, {"thermo", "camera"}],
    ]
    vc, nodes, stats, prime = build_vc_fixture(day_sets)
    coordinator = CtiCoordinator()
    session = coordinator.initiate_hunt("s", [], [make_gateway(i) for i in range(3)])
    params = InsightsParams(min_support=0.4)
    result = run_insights_round(
        vc, nodes, ["camera", "lock", "thermo"], stats, prime, 77, params,
        coordinator=coordinator, session=session,
    )
    member_messages = [
        rec for rec in session.stored_transcripts if rec.sender != "cti" and rec.receiver != "cti"
    ]
    assert member_messages, "the round must relay through the coordinator"
    for rec in member_messages:
        for tok in ("camera", "lock", "thermo"):
            assert tok.encode() not in rec.payload
    assert groups_are_disjoint(result.vc)
    assert result.vc.members == frozenset(make_gateway(i) for i in range(3))
    if result.vc.groups:
        assert frozenset().union(*(g.members for g in result.vc.groups)) == result.vc.members


def test_singleton_vc_round():
    day_sets = [[{"a", "b"}, {"a"}]]
    vc, nodes, stats, prime = build_vc_fixture(day_sets)
    params = InsightsParams(min_support=0.5)
    result = run_insights_round(vc, nodes, ["a", "b"], stats, prime, 5, params)
    got = {fs.events: fs.global_support for fs in result.catalog}
    assert got == {events: c for events, (c, _) in pooled_oracle(day_sets, 0.5, 3).items()}
    assert len(result.vc.groups) >= 1


# ---------------------------------------------------------------------------
# Enrollment
# ---------------------------------------------------------------------------


def published_fixture():
    vc_support = {"x1": 0.5, "x2": 0.5, "y1": 0.5, "y2": 0.5}
    groups = (
        PublishedGroup(
            "g-x", ("x1", "x2"), "x1", 2, ("p0", "p1"), {"x1": 1.0, "x2": 1.0}, vc_support
        ),
        PublishedGroup(
            "g-y", ("y1", "y2"), "y1", 2, ("p2",), {"y1": 1.0, "y2": 1.0}, vc_support
        ),
    )
    return PublishedCatalog(groups)


def test_enroll_single_group_catalog():
    catalog = PublishedCatalog((published_fixture().groups[0],))
    ranking, chosen = enroll_new_member({"x1": 1.0}, catalog)
    assert chosen.group_id == "g-x"
    assert len(ranking) == 1


def test_enroll_planted_topic_ranks_first():
    catalog = published_fixture()
    ranking, chosen = enroll_new_member({"y1": 0.4, "y2": 0.6}, catalog)
    assert chosen.group_id == "g-y"
    assert ranking[0][0] == "g-y"


def test_enroll_ranking_is_permutation():
    catalog = published_fixture()
    ranking, _ = enroll_new_member({"x1": 0.2, "y1": 0.3}, catalog)
    assert sorted(gid for gid, _ in ranking) == ["g-x", "g-y"]


def test_enroll_empty_catalog_is_error():
    with pytest.raises(ProtocolAbort):
        enroll_new_member({"x1": 1.0}, PublishedCatalog(()))
