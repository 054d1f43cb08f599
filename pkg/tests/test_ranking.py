import itertools
import random

import pytest

from veilhunt.coordinator import CtiCoordinator, decode_payload
from veilhunt.crypto import envelope_open, generate_blind_keypair
from veilhunt.model import EventVector, SanitizedLog
from veilhunt.node import GatewayNode
from veilhunt.ranking import (
    ProtocolAbort,
    SimilarityMatrix,
    aggregate_similarities,
    form_ring,
    psi_session,
    s_seeds_cluster,
    submit_report,
)
from veilhunt.sanitize import SanitizePolicy
from veilhunt.seeding import derive_rng
from veilhunt.weighting import gateways_similarity

from .conftest import make_gateway, make_log


def node_with_tokens(i, tokens):
    """A gateway node whose PSI-visible token set is exactly ``tokens``."""
    gw = make_gateway(i)
    log = make_log(gw, sorted(tokens) or ["placeholder"])
    node = GatewayNode(gw, log, SanitizePolicy(frozenset()))
    san = SanitizedLog(gw, log.records, 0)
    node.sanitized = san
    weights = {tok: 1.0 for tok in tokens}
    node.vector = EventVector(gw, weights, frozenset(tokens))
    return node


# ---------------------------------------------------------------------------
# Ring formation
# ---------------------------------------------------------------------------


def test_form_ring_is_deterministic():
    members = [make_gateway(i) for i in range(6)]
    assert form_ring(members, 42) == form_ring(members, 42)


def test_form_ring_three_members():
    members = [make_gateway(i) for i in range(3)]
    ring = form_ring(members, 1)
    assert len(ring.order) == 3
    assert ring.trusted_node in ring.order


def test_form_ring_rejects_small_groups():
    with pytest.raises(ProtocolAbort):
        form_ring([make_gateway(0), make_gateway(1)], 1)


def test_form_ring_seed_changes_order():
    members = [make_gateway(i) for i in range(16)]
    a = form_ring(members, 100)
    b = form_ring(members, 101)
    assert a.order != b.order
    assert set(a.order) == set(b.order)


# ---------------------------------------------------------------------------
# Pairwise private intersection
# ---------------------------------------------------------------------------


def test_psi_identical_sets():
    a = node_with_tokens(0, {"a", "b"})
    b = node_with_tokens(1, {"a", "b"})
    t = psi_session(a, b, run_seed=5, key_bits=512)
    assert len(t.intersection) == 2


def test_psi_disjoint_sets():
    a = node_with_tokens(0, {"a", "b"})
    b = node_with_tokens(1, {"c", "d"})
    t = psi_session(a, b, run_seed=5, key_bits=512)
    assert len(t.intersection) == 0


def test_psi_matches_plaintext_oracle():
    rng = random.Random(71)
    vocab = [f"tok{i}" for i in range(60)]
    for trial in range(25):
        set_a = set(rng.sample(vocab, rng.randrange(0, 41)))
        set_b = set(rng.sample(vocab, rng.randrange(0, 41)))
        a = node_with_tokens(0, set_a)
        b = node_with_tokens(1, set_b)
        t = psi_session(a, b, run_seed=trial, key_bits=512)
        assert len(t.intersection) == len(set_a & set_b)
        assert t.size_signer == len(set_a)
        assert t.size_requester == len(set_b)


def test_psi_transcript_carries_no_raw_tokens():
    tokens = {"camera", "lock", "thermo"}
    a = node_with_tokens(0, tokens)
    b = node_with_tokens(1, {"camera", "siren"})
    coordinator = CtiCoordinator()
    session = coordinator.initiate_hunt(
        "s", [], [make_gateway(i) for i in range(3)]
    )
    psi_session(a, b, run_seed=9, key_bits=512, coordinator=coordinator, session=session)
    blob = b"".join(rec.payload for rec in session.stored_transcripts)
    for tok in tokens | {"siren"}:
        assert tok.encode() not in blob


def test_reports_are_sealed_and_schema_complete():
    a = node_with_tokens(0, {"a", "b", "c"})
    b = node_with_tokens(1, {"b", "c", "d"})
    t = psi_session(a, b, run_seed=13, key_bits=512)
    rng = derive_rng(13, "report")
    trusted = make_gateway(9)
    trusted_key = generate_blind_keypair(512, derive_rng(13, "trusted"))
    env = submit_report(b, t, trusted, trusted_key.public(), rng)
    body = decode_payload(envelope_open(env, trusted_key))
    assert set(body) == {"pair", "intersection", "size_signer", "size_requester"}
    assert body["pair"] == [a.gid.pseudonym, b.gid.pseudonym]
    assert len(body["intersection"]) == 2

    from veilhunt.crypto import EnvelopeError

    wrong = generate_blind_keypair(512, derive_rng(14, "other"))
    with pytest.raises(EnvelopeError):
        envelope_open(env, wrong)


def test_report_payload_contains_no_vocabulary_substring():
    vocab = [f"svc{i:02d}" for i in range(54)]
    a = node_with_tokens(0, set(vocab[:10]))
    b = node_with_tokens(1, set(vocab[5:15]))
    t = psi_session(a, b, run_seed=17, key_bits=512)
    trusted_key = generate_blind_keypair(512, derive_rng(17, "trusted"))
    env = submit_report(b, t, make_gateway(9), trusted_key.public(), derive_rng(17, "r"))
    opened = envelope_open(env, trusted_key)
    for tok in vocab:
        assert tok.encode() not in opened


def test_submit_report_refuses_wrong_side():
    a = node_with_tokens(0, {"a"})
    b = node_with_tokens(1, {"a"})
    t = psi_session(a, b, run_seed=3, key_bits=512)
    trusted_key = generate_blind_keypair(512, derive_rng(3, "t"))
    with pytest.raises(ProtocolAbort):
        submit_report(a, t, make_gateway(9), trusted_key.public(), derive_rng(3, "r"))


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


def run_all_pairs(nodes, run_seed, trusted_key, trusted):
    reports = []
    for i, j in itertools.combinations(range(len(nodes)), 2):
        t = psi_session(nodes[i], nodes[j], run_seed, 512)
        rng = derive_rng(run_seed, "report", i, j)
        reports.append(submit_report(nodes[j], t, trusted, trusted_key.public(), rng))
    return reports


def test_matrix_matches_plaintext_similarities():
    token_sets = [
        {"a", "b", "c"},
        {"a", "b"},
        {"c", "d", "e", "f"},
        {"a", "c", "f"},
        {"x", "y"},
        {"x", "y", "z"},
    ]
    nodes = [node_with_tokens(i, s) for i, s in enumerate(token_sets)]
    trusted_key = generate_blind_keypair(512, derive_rng(23, "t"))
    reports = run_all_pairs(nodes, 23, trusted_key, make_gateway(9))
    matrix = aggregate_similarities(reports, trusted_key, [n.gid for n in nodes])
    assert len(reports) == 15  # n(n-1)/2 reports consumed
    for i, j in itertools.combinations(range(6), 2):
        expected = gateways_similarity(nodes[i].vector, nodes[j].vector)
        got = matrix.similarity(nodes[i].gid.pseudonym, nodes[j].gid.pseudonym)
        assert got == pytest.approx(expected)
    for i in range(6):
        p = nodes[i].gid.pseudonym
        assert matrix.similarity(p, p) == pytest.approx(1 / len(token_sets[i]))


def test_all_disjoint_gives_zero_off_diagonal():
    nodes = [node_with_tokens(i, {f"only{i}"}) for i in range(3)]
    trusted_key = generate_blind_keypair(512, derive_rng(29, "t"))
    reports = run_all_pairs(nodes, 29, trusted_key, make_gateway(9))
    matrix = aggregate_similarities(reports, trusted_key, [n.gid for n in nodes])
    for i, j in itertools.combinations(range(3), 2):
        assert matrix.values[i][j] == 0.0


def test_missing_pair_is_reported():
    nodes = [node_with_tokens(i, {"a"}) for i in range(4)]
    trusted_key = generate_blind_keypair(512, derive_rng(31, "t"))
    reports = run_all_pairs(nodes, 31, trusted_key, make_gateway(9))
    with pytest.raises(ProtocolAbort) as err:
        aggregate_similarities(reports[:-1], trusted_key, [n.gid for n in nodes])
    assert "missing pair" in str(err.value)


# ---------------------------------------------------------------------------
# Clustering
# ---------------------------------------------------------------------------


def matrix_from_blocks(n, block_of, intra, inter, sizes=None):
    order = tuple(make_gateway(i).pseudonym for i in range(n))
    values = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i == j:
                values[i][j] = 1.0
            else:
                values[i][j] = intra if block_of[i] == block_of[j] else inter
    return SimilarityMatrix(order, tuple(tuple(row) for row in values), tuple(sizes or [1] * n))


def test_theta_above_everything_gives_singletons():
    block_of = [0, 0, 1, 1]
    matrix = matrix_from_blocks(4, block_of, intra=0.3, inter=0.1)
    groups = s_seeds_cluster(matrix, [make_gateway(i) for i in range(4)], theta=0.5)
    assert len(groups) == 4
    assert all(len(g.members) == 1 for g in groups)


def test_recovers_planted_blocks():
    block_of = [0, 0, 0, 1, 1, 1]
    matrix = matrix_from_blocks(6, block_of, intra=0.4, inter=0.0)
    participants = [make_gateway(i) for i in range(6)]
    groups = s_seeds_cluster(matrix, participants, theta=0.2)
    got = {frozenset(gw.index for gw in g.members) for g in groups}
    assert got == {frozenset({0, 1, 2}), frozenset({3, 4, 5})}
    for g in groups:
        assert g.trusted_node in g.members


def test_partition_property_and_order_invariance():
    rng = random.Random(37)
    n = 8
    participants = [make_gateway(i) for i in range(n)]
    order = tuple(gw.pseudonym for gw in participants)
    values = [[0.0] * n for _ in range(n)]
    for i in range(n):
        values[i][i] = 1.0
        for j in range(i + 1, n):
            values[i][j] = values[j][i] = rng.choice([0.0, 0.1, 0.25, 0.4])
    matrix = SimilarityMatrix(order, tuple(tuple(r) for r in values), tuple([1] * n))

    baseline = {
        frozenset(gw.pseudonym for gw in g.members)
        for g in s_seeds_cluster(matrix, participants, theta=0.2)
    }
    all_members = [gw for g in s_seeds_cluster(matrix, participants, theta=0.2) for gw in g.members]
    assert sorted(gw.index for gw in all_members) == list(range(n))  # a partition

    for _ in range(5):
        shuffled = participants[:]
        rng.shuffle(shuffled)
        got = {
            frozenset(gw.pseudonym for gw in g.members)
            for g in s_seeds_cluster(matrix, shuffled, theta=0.2)
        }
        assert got == baseline


def test_max_groups_caps_seeds():
    block_of = [0, 1, 2, 3]
    matrix = matrix_from_blocks(4, block_of, intra=0.0, inter=0.0)
    groups = s_seeds_cluster(matrix, [make_gateway(i) for i in range(4)], theta=0.5, max_groups=2)
    assert len(groups) == 2
    assert sum(len(g.members) for g in groups) == 4


def test_empty_matrix_gives_empty_result():
    matrix = SimilarityMatrix((), (), ())
    assert s_seeds_cluster(matrix, [], theta=0.2) == []
