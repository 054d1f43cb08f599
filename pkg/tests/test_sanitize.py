import random

import pytest

from veilhunt.model import EventLog
from veilhunt.sanitize import (
    PolicyError,
    SanitizePolicy,
    generalize,
    load_policy,
    sanitize,
    sanitize_again,
    save_policy,
)

from .conftest import make_gateway, make_log

LEAVES = [
    "camera.stream.start",
    "camera.stream.stop",
    "camera.motion.detected",
    "lock.door.open",
    "lock.door.close",
    "thermo.temp.set",
]


def test_generalize_root_is_fixed_point(taxonomy):
    for depth in (0, 1, 5):
        assert generalize("root", taxonomy, depth) == "root"


def test_generalize_identity_at_own_depth(taxonomy):
    # camera.stream.start sits at depth 3
    assert generalize("camera.stream.start", taxonomy, 3) == "camera.stream.start"
    assert generalize("camera.stream.start", taxonomy, 7) == "camera.stream.start"


def test_generalize_cuts_to_depth_one(taxonomy):
    # path: root -> camera -> camera.stream -> camera.stream.start
    assert generalize("camera.stream.start", taxonomy, 1) == "camera"
    assert generalize("camera.stream.start", taxonomy, 2) == "camera.stream"


def test_generalize_unknown_token_names_it(taxonomy):
    with pytest.raises(Exception) as err:
        generalize("no.such.token", taxonomy, 1)
    assert "no.such.token" in str(err.value)


def test_sanitize_empty_log(taxonomy):
    gw = make_gateway(0)
    out = sanitize(EventLog(gw, ()), taxonomy, SanitizePolicy(frozenset()))
    assert out.records == ()
    assert out.suppressed_count == 0


def test_sanitize_counts_suppressed(taxonomy):
    gw = make_gateway(0)
    log = make_log(
        gw,
        ["lock.door.open", "camera.stream.start", "lock.door.open", "thermo.temp.set", "camera.stream.stop"],
    )
    policy = SanitizePolicy(frozenset({"lock.door.open"}), default_depth=1)
    out = sanitize(log, taxonomy, policy)
    assert out.suppressed_count == 2
    assert len(out.records) == 3
    assert [r.event_id for r in out.records] == ["camera", "thermo", "camera"]


def test_record_count_conservation(taxonomy):
    rng = random.Random(7)
    policy = SanitizePolicy(frozenset({"lock.door.open", "thermo.temp.set"}), default_depth=2)
    for _ in range(100):
        gw = make_gateway(0)
        log = make_log(gw, rng.choices(LEAVES, k=rng.randrange(0, 30)))
        out = sanitize(log, taxonomy, policy)
        assert len(out.records) + out.suppressed_count == len(log.records)


def test_outputs_lie_on_root_path(taxonomy):
    rng = random.Random(11)
    policy = SanitizePolicy(frozenset(), default_depth=1)
    for _ in range(50):
        log = make_log(make_gateway(0), rng.choices(LEAVES, k=10))
        out = sanitize(log, taxonomy, policy)
        for raw, cooked in zip(log.records, out.records):
            assert cooked.event_id in taxonomy.path_to_root(raw.event_id)


def test_sanitize_idempotent(taxonomy):
    rng = random.Random(3)
    policy = SanitizePolicy(frozenset({"camera.motion.detected"}), default_depth=1)
    for _ in range(500):
        log = make_log(make_gateway(0), rng.choices(LEAVES, k=rng.randrange(1, 15)))
        once = sanitize(log, taxonomy, policy)
        twice = sanitize_again(once, taxonomy, policy)
        assert twice.records == once.records
        assert twice.suppressed_count == once.suppressed_count


def test_no_sensitive_token_survives(taxonomy):
    rng = random.Random(5)
    sensitive = frozenset({"lock.door.open", "lock.door.close"})
    policy = SanitizePolicy(sensitive, default_depth=1)
    for _ in range(100):
        log = make_log(make_gateway(0), rng.choices(LEAVES, k=20))
        out = sanitize(log, taxonomy, policy)
        assert not out.tokens() & sensitive


def test_policy_rejects_overlap(taxonomy):
    policy = SanitizePolicy(frozenset({"camera"}), {"camera": 1})
    with pytest.raises(PolicyError):
        policy.validate(taxonomy)


def test_policy_rejects_unknown_tokens_before_output(taxonomy):
    policy = SanitizePolicy(frozenset({"ghost.event"}))
    log = make_log(make_gateway(0), ["camera.stream.start"])
    with pytest.raises(PolicyError):
        sanitize(log, taxonomy, policy)


def test_policy_file_round_trip(tmp_path, taxonomy):
    policy = SanitizePolicy(
        frozenset({"lock.door.open"}), {"camera.stream.start": 2}, default_depth=1
    )
    path = tmp_path / "policy.json"
    save_policy(policy, path)
    loaded = load_policy(path)
    assert loaded == policy
