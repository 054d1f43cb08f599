"""End-to-end simulation driver: sanitize, weight, rank, mine, publish.

One call runs the whole hunt for a synthesized dataset and, when an output
directory is given, writes groups.json, catalog.json, session.json,
timing.csv, similarity.csv and (with record=True) transcript.jsonl.  Runs
are bit-deterministic for a fixed dataset and seed.
"""

from __future__ import annotations

import csv
import itertools
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from .coordinator import (
    CtiCoordinator,
    HuntSession,
    Phase,
    ThreatCategorySeed,
    encode_payload,
    export_session,
    export_transcript,
)
from .crypto import generate_shared_prime
from .insights import (
    InsightsParams,
    InsightsResult,
    PublishedCatalog,
    PublishedGroup,
    run_insights_round,
    set_digest,
    token_digest,
)
from .model import EventVector, TaxonomyTree, VirtualThreatGroup
from .node import GatewayNode
from .ranking import (
    SimilarityMatrix,
    aggregate_similarities,
    form_ring,
    psi_session,
    s_seeds_cluster,
    submit_report,
)
from .seeding import derive_rng
from .synth import SynthDataset
from .weighting import build_corpus_stats

CTI_NAME = "cti"


@dataclass
class RunParams:
    key_bits: int = 512
    theta: float = 0.15
    max_groups: int | None = None
    min_support: float = 0.3
    min_closure: float = 0.5
    max_set_size: int = 3
    merge_threshold: float = 1.0
    prune_lonely: bool = False
    log_base: str = "e"
    classic_dice: bool = False  # cluster on classical Dice instead of the primary formula
    run_seed: int | None = None

    def insights(self) -> InsightsParams:
        return InsightsParams(
            self.min_support,
            self.min_closure,
            self.max_set_size,
            self.merge_threshold,
            self.prune_lonely,
            self.log_base,
        )


@dataclass
class PipelineResult:
    session: HuntSession
    virtual_groups: list[VirtualThreatGroup]
    insights: list[InsightsResult]
    matrix: SimilarityMatrix
    classic_matrix: SimilarityMatrix
    groups_doc: dict
    catalog: PublishedCatalog
    catalog_doc: dict
    timings: dict[str, float] = field(default_factory=dict)


def run_pipeline(dataset: SynthDataset, params: RunParams, out_dir=None, record: bool = True) -> PipelineResult:
    run_seed = params.run_seed if params.run_seed is not None else dataset.config.rng_seed
    timings: dict[str, float] = {}
    t_start = time.perf_counter()

    coordinator = CtiCoordinator()
    categories = [
        ThreatCategorySeed(topic, frozenset(cats), f"countermeasure bundle for {topic}")
        for topic, cats in sorted(dataset.categories.items())
    ]
    participants = [log.gateway for log in dataset.logs]
    session = coordinator.initiate_hunt(f"hunt-{run_seed}", categories, participants)

    comm_prime = generate_shared_prime(params.key_bits, derive_rng(run_seed, "comm-prime"))
    params_payload = encode_payload({"comm_prime": comm_prime, "key_bits": params.key_bits})
    for gw in participants:
        coordinator.relay(session, params_payload, CTI_NAME, gw.pseudonym, "run-params")

    # Local concealment and weighting.
    t0 = time.perf_counter()
    nodes: dict[str, GatewayNode] = {}
    for log in dataset.logs:
        node = GatewayNode(log.gateway, log, dataset.policies[log.gateway.pseudonym])
        node.conceal_log(dataset.taxonomy)
        node.provision_keys(run_seed, params.key_bits, comm_prime)
        nodes[log.gateway.pseudonym] = node
    stats = build_corpus_stats([n.sanitized for n in nodes.values()])
    for node in nodes.values():
        if node.sanitized.records:
            node.build_vector(stats, params.log_base)
        else:
            node.vector = EventVector(node.gid, {}, frozenset())
    timings["sanitize"] = time.perf_counter() - t0

    # Stage one: pairwise intersections over the ring, then clustering.
    t0 = time.perf_counter()
    coordinator.advance_phase(session, Phase.RANKING)
    ring = form_ring(participants, run_seed)
    trusted = nodes[ring.trusted_node.pseudonym]
    envelopes = []
    for i, j in itertools.combinations(range(len(ring.order)), 2):
        signer = nodes[ring.order[i].pseudonym]
        requester = nodes[ring.order[j].pseudonym]
        transcript = psi_session(signer, requester, run_seed, params.key_bits, coordinator, session)
        env = submit_report(
            requester,
            transcript,
            trusted.gid,
            trusted.envelope_key.public(),
            derive_rng(run_seed, "report", signer.gid.pseudonym, requester.gid.pseudonym),
        )
        coordinator.relay(
            session,
            encode_payload({"envelope": env.ciphertext.hex()}),
            requester.gid.pseudonym,
            trusted.gid.pseudonym,
            "pair-report",
        )
        envelopes.append(env)
    matrix = aggregate_similarities(envelopes, trusted.envelope_key, participants)
    classic_matrix = aggregate_similarities(envelopes, trusted.envelope_key, participants, classic=True)
    cluster_on = classic_matrix if params.classic_dice else matrix
    vcs = s_seeds_cluster(cluster_on, participants, params.theta, params.max_groups)
    timings["ranking"] = time.perf_counter() - t0

    # Stage two: one insights round per virtual group.
    t0 = time.perf_counter()
    coordinator.advance_phase(session, Phase.INSIGHTS)
    results: list[InsightsResult] = []
    for vc in sorted(vcs, key=lambda v: v.trusted_node.pseudonym):
        results.append(
            run_insights_round(
                vc,
                nodes,
                dataset.taxonomy.nodes,
                stats,
                comm_prime,
                run_seed,
                params.insights(),
                coordinator,
                session,
            )
        )
    timings["insights"] = time.perf_counter() - t0

    # Publish: final groups, core-point catalog, countermeasures.
    t0 = time.perf_counter()
    coordinator.advance_phase(session, Phase.PUBLISH)
    groups_doc = build_groups_doc(results)
    catalog = build_published_catalog(results, dataset.taxonomy, categories)
    catalog_doc = catalog_to_doc(catalog)
    for result in results:
        final_payload = {
            "trusted_node": result.vc.trusted_node.pseudonym,
            "groups": [
                {
                    "id": str(set_digest(g.events)),
                    "events": [
                        {"digest": token_digest(tok), "label": tok} for tok in sorted(g.events)
                    ],
                    "members": sorted(gw.pseudonym for gw in g.members),
                    "core_point": g.core_point,
                    "level": g.level,
                }
                for g in result.vc.groups
            ],
        }
        coordinator.relay(
            session,
            encode_payload(final_payload),
            result.vc.trusted_node.pseudonym,
            CTI_NAME,
            "final-groups",
        )
    coordinator.store_groups(session, [r.vc for r in results])
    coordinator.store_catalog(session, catalog_doc)
    coordinator.advance_phase(session, Phase.DONE)
    timings["publish"] = time.perf_counter() - t0
    timings["total"] = time.perf_counter() - t_start

    result = PipelineResult(
        session, [r.vc for r in results], results, matrix, classic_matrix, groups_doc, catalog, catalog_doc, timings
    )
    if out_dir is not None:
        write_outputs(result, Path(out_dir), record)
    return result


# ---------------------------------------------------------------------------
# Documents
# ---------------------------------------------------------------------------


def build_groups_doc(results: list[InsightsResult]) -> dict:
    virtual_groups = []
    for result in sorted(results, key=lambda r: r.vc.trusted_node.pseudonym):
        groups = []
        for g in sorted(result.vc.groups, key=lambda g: g.canonical_id()):
            parent = result.parent_ids.get(g.canonical_id())
            groups.append(
                {
                    "id": str(set_digest(g.events)),
                    "events": [
                        {"digest": token_digest(tok), "label": tok} for tok in sorted(g.events)
                    ],
                    "members": sorted(gw.pseudonym for gw in g.members),
                    "core_point": g.core_point,
                    "level": g.level,
                    "parent": str(set_digest(parent.split("|"))) if parent else None,
                }
            )
        virtual_groups.append(
            {
                "trusted_node": result.vc.trusted_node.pseudonym,
                "members": sorted(gw.pseudonym for gw in result.vc.members),
                "groups": groups,
            }
        )
    return {"virtual_groups": virtual_groups}


def _countermeasures_for(
    events, taxonomy: TaxonomyTree, categories: list[ThreatCategorySeed]
) -> str:
    """The payload of the category whose seed events cover most of the group."""
    def overlap(seed: ThreatCategorySeed) -> int:
        hits = 0
        for tok in events:
            path = set(taxonomy.path_to_root(tok))
            if seed.seed_events & path:
                hits += 1
        return hits

    best = min(categories, key=lambda s: (-overlap(s), s.category_id), default=None)
    if best is None or overlap(best) == 0:
        return ""
    return best.countermeasures


def build_published_catalog(
    results: list[InsightsResult], taxonomy: TaxonomyTree, categories: list[ThreatCategorySeed]
) -> PublishedCatalog:
    groups = []
    for result in sorted(results, key=lambda r: r.vc.trusted_node.pseudonym):
        ctx = result.ctx
        vc_support = ctx.vc_support()
        for g in sorted(result.vc.groups, key=lambda g: g.canonical_id()):
            parent = result.parent_ids.get(g.canonical_id())
            groups.append(
                PublishedGroup(
                    group_id=str(set_digest(g.events)),
                    events=tuple(sorted(g.events)),
                    core_point=g.core_point,
                    level=g.level,
                    members=tuple(sorted(gw.pseudonym for gw in g.members)),
                    rc_support=ctx.rc_support(g.members),
                    vc_support=vc_support,
                    parent_id=str(set_digest(parent.split("|"))) if parent else None,
                    countermeasures=_countermeasures_for(g.events, taxonomy, categories),
                )
            )
    return PublishedCatalog(tuple(groups))


def catalog_to_doc(catalog: PublishedCatalog) -> dict:
    return {
        "groups": [
            {
                "group_id": g.group_id,
                "events": list(g.events),
                "core_point": g.core_point,
                "level": g.level,
                "members": list(g.members),
                "rc_support": {k: v for k, v in sorted(g.rc_support.items())},
                "vc_support": {k: v for k, v in sorted(g.vc_support.items())},
                "parent_id": g.parent_id,
                "countermeasures": g.countermeasures,
            }
            for g in catalog.groups
        ]
    }


def catalog_from_doc(doc: dict) -> PublishedCatalog:
    return PublishedCatalog(
        tuple(
            PublishedGroup(
                g["group_id"],
                tuple(g["events"]),
                g["core_point"],
                int(g["level"]),
                tuple(g["members"]),
                g["rc_support"],
                g["vc_support"],
                g.get("parent_id"),
                g.get("countermeasures", ""),
            )
            for g in doc["groups"]
        )
    )


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------


def write_outputs(result: PipelineResult, out: Path, record: bool) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "groups.json").write_text(
        json.dumps(result.groups_doc, sort_keys=True, indent=2) + "\n"
    )
    (out / "catalog.json").write_text(
        json.dumps(result.catalog_doc, sort_keys=True, indent=2) + "\n"
    )
    export_session(
        result.session,
        out / "session.json",
        group_summary=[
            {
                "trusted_node": vc["trusted_node"],
                "members": len(vc["members"]),
                "groups": len(vc["groups"]),
            }
            for vc in result.groups_doc["virtual_groups"]
        ],
    )
    if record:
        export_transcript(result.session, out / "transcript.jsonl")
    write_timing_csv(result.timings, out / "timing.csv")
    write_similarity_csv(result, out / "similarity.csv")


def write_timing_csv(timings: dict[str, float], path, extra: dict | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = list(extra or {}) + ["phase", "seconds"]
        writer.writerow(header)
        prefix = list((extra or {}).values())
        for phase, seconds in timings.items():
            writer.writerow(prefix + [phase, f"{seconds:.6f}"])


def write_similarity_csv(result: PipelineResult, path) -> None:
    """Both similarity readings side by side for every pair."""
    order = result.matrix.order
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["gateway_a", "gateway_b", "similarity", "classic_dice"])
        for i in range(len(order)):
            for j in range(i + 1, len(order)):
                writer.writerow(
                    [
                        order[i],
                        order[j],
                        f"{result.matrix.values[i][j]:.6f}",
                        f"{result.classic_matrix.values[i][j]:.6f}",
                    ]
                )
