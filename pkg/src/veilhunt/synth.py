"""Synthetic smart-home datasets with planted topic structure.

The default shape is 54 threat services over 30 IoT devices, with fully
synthetic content: a three-level taxonomy
(category / service / leaf event), topics with disjoint service sets plus a
shared background pool, and per-gateway logs dominated by the gateway's
planted topic.  A fraction of every topic's leaf vocabulary is marked
sensitive in the owners' policies; the leak scenario moves a further
fraction of those out of the policy to model intentional disclosure.

Vocabulary granularity is configurable (``events_per_service``,
``generalize_depth``) rather than fixed.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping

from .model import (
    Event,
    EventLog,
    GatewayId,
    TaxonomyTree,
    Token,
    load_event_logs,
    load_taxonomy,
    save_event_logs,
    save_taxonomy,
)
from .sanitize import SanitizePolicy
from .seeding import derive_rng

ROOT_TOKEN = "event"
BACKGROUND_TOPIC = "background"


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    num_gateways: int = 16
    num_devices: int = 30
    num_threat_services: int = 54
    days: int = 7
    events_per_day: int = 40
    planted_topics: int = 4
    categories_per_topic: int = 2
    events_per_service: int = 4
    topic_dominance: float = 0.8
    sensitive_fraction: float = 0.2
    generalize_depth: int = 1
    leak_fraction: float = 0.0
    rng_seed: int = 0

    def validate(self) -> None:
        if self.planted_topics > self.num_gateways:
            raise SynthError(
                f"{self.planted_topics} topics cannot be planted across {self.num_gateways} gateways"
            )
        if self.planted_topics < 1:
            raise SynthError("at least one topic is required")
        if self.categories_per_topic < 1:
            raise SynthError("each topic needs at least one category")
        if not 0.0 <= self.leak_fraction <= 1.0:
            raise SynthError("leak_fraction must be in [0, 1]")
        if not 0.0 < self.topic_dominance <= 1.0:
            raise SynthError("topic_dominance must be in (0, 1]")
        if self.num_threat_services < (self.planted_topics + 1) * self.categories_per_topic:
            raise SynthError("need at least one service per category (topics plus background)")


@dataclass(frozen=True)
class GroundTruth:
    topic_of: Mapping[str, str]  # gateway pseudonym -> topic id
    topic_vocab: Mapping[str, tuple[Token, ...]]  # topic id -> leaf vocabulary
    background_vocab: tuple[Token, ...]
    sensitive_tokens: Mapping[str, tuple[Token, ...]]  # pseudonym -> originally sensitive
    leaked_tokens: Mapping[str, tuple[Token, ...]]  # pseudonym -> intentionally disclosed

    def members_of(self, topic_id: str) -> set[str]:
        return {ps for ps, topic in self.topic_of.items() if topic == topic_id}

    def all_sensitive(self) -> set[Token]:
        return {tok for toks in self.sensitive_tokens.values() for tok in toks}

    def all_leaked(self) -> set[Token]:
        return {tok for toks in self.leaked_tokens.values() for tok in toks}


@dataclass
class SynthDataset:
    config: SynthConfig
    logs: list[EventLog]
    taxonomy: TaxonomyTree
    policies: dict[str, SanitizePolicy]
    truth: GroundTruth
    categories: dict[str, list[str]] = field(default_factory=dict)  # topic id -> category tokens


def _build_taxonomy(config: SynthConfig) -> tuple[TaxonomyTree, dict[str, list[Token]], dict[str, list[str]]]:
    """Taxonomy plus per-topic leaf vocabulary and topic -> categories map.

    Every topic (and the shared background pool) spans several depth-1
    categories; splitting keeps cross-topic sanitized logs at a similarity
    below theta while same-topic logs share their full category set.
    """
    topics = [f"topic{i}" for i in range(config.planted_topics)] + [BACKGROUND_TOPIC]
    n_categories = len(topics) * config.categories_per_topic
    per_category = config.num_threat_services // n_categories
    leftovers = config.num_threat_services - per_category * n_categories
    parent: dict[Token, Token] = {}
    vocab: dict[str, list[Token]] = {t: [] for t in topics}
    categories: dict[str, list[str]] = {t: [] for t in topics}
    service = 0
    cat_index = 0
    for topic in topics:
        for c in range(config.categories_per_topic):
            category = f"cat.{topic}.{c}"
            categories[topic].append(category)
            parent[category] = ROOT_TOKEN
            count = per_category + (1 if n_categories - cat_index <= leftovers else 0)
            cat_index += 1
            for _ in range(count):
                svc = f"svc{service:02d}"
                parent[svc] = category
                for e in range(config.events_per_service):
                    leaf = f"{svc}.e{e}"
                    parent[leaf] = svc
                    vocab[topic].append(leaf)
                service += 1
    return TaxonomyTree(parent, ROOT_TOKEN), vocab, categories


def synthesize(config: SynthConfig) -> SynthDataset:
    config.validate()
    taxonomy, vocab, categories = _build_taxonomy(config)
    topics = [t for t in vocab if t != BACKGROUND_TOPIC]
    background = vocab[BACKGROUND_TOPIC]

    id_rng = derive_rng(config.rng_seed, "pseudonyms")
    gateways = [GatewayId(f"{id_rng.getrandbits(128):032x}", i) for i in range(config.num_gateways)]

    sens_rng = derive_rng(config.rng_seed, "sensitive")
    sensitive_of_topic: dict[str, list[Token]] = {}
    for topic in topics:
        k = round(config.sensitive_fraction * len(vocab[topic]))
        sensitive_of_topic[topic] = sorted(sens_rng.sample(sorted(vocab[topic]), k))

    logs: list[EventLog] = []
    policies: dict[str, SanitizePolicy] = {}
    topic_of: dict[str, str] = {}
    sensitive_by_gw: dict[str, tuple[Token, ...]] = {}
    leaked_by_gw: dict[str, tuple[Token, ...]] = {}

    per_day_topic = round(config.events_per_day * config.topic_dominance)
    for gw in gateways:
        topic = topics[gw.index % len(topics)]
        topic_of[gw.pseudonym] = topic
        rng = derive_rng(config.rng_seed, "log", gw.pseudonym)
        records = []
        for day in range(config.days):
            tokens = [rng.choice(vocab[topic]) for _ in range(per_day_topic)]
            tokens += [
                rng.choice(background) for _ in range(config.events_per_day - per_day_topic)
            ]
            rng.shuffle(tokens)
            for offset, tok in enumerate(tokens):
                device = f"dev{rng.randrange(config.num_devices):02d}"
                records.append(Event(tok, device, day * 86400 + offset))
        logs.append(EventLog(gw, tuple(records)))

        sensitive = list(sensitive_of_topic[topic])
        leak_rng = derive_rng(config.rng_seed, "leak", gw.pseudonym)
        n_leak = round(config.leak_fraction * len(sensitive))
        leaked = sorted(leak_rng.sample(sensitive, n_leak)) if n_leak else []
        sensitive_by_gw[gw.pseudonym] = tuple(sensitive)
        leaked_by_gw[gw.pseudonym] = tuple(leaked)
        kept_sensitive = frozenset(sensitive) - frozenset(leaked)
        # disclosed tokens bypass generalization entirely: they stay leaf-level
        policies[gw.pseudonym] = SanitizePolicy(
            sensitive_events=kept_sensitive,
            generalize_events={tok: taxonomy.depth(tok) for tok in leaked},
            default_depth=config.generalize_depth,
        )

    truth = GroundTruth(topic_of, {t: tuple(v) for t, v in vocab.items() if t != BACKGROUND_TOPIC},
                        tuple(background), sensitive_by_gw, leaked_by_gw)
    return SynthDataset(config, logs, taxonomy, policies, truth, categories)


# ---------------------------------------------------------------------------
# Dataset directory layout
# ---------------------------------------------------------------------------


def save_dataset(dataset: SynthDataset, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_event_logs(dataset.logs, out / "logs.jsonl")
    save_taxonomy(dataset.taxonomy, out / "taxonomy.tsv")
    policies = {
        ps: {
            "sensitive": sorted(p.sensitive_events),
            "generalize": dict(sorted(p.generalize_events.items())),
            "default_depth": p.default_depth,
        }
        for ps, p in dataset.policies.items()
    }
    (out / "policies.json").write_text(json.dumps(policies, sort_keys=True, indent=2) + "\n")
    truth = {
        "topic_of": dict(sorted(dataset.truth.topic_of.items())),
        "topic_vocab": {t: list(v) for t, v in sorted(dataset.truth.topic_vocab.items())},
        "background_vocab": list(dataset.truth.background_vocab),
        "sensitive_tokens": {ps: list(v) for ps, v in sorted(dataset.truth.sensitive_tokens.items())},
        "leaked_tokens": {ps: list(v) for ps, v in sorted(dataset.truth.leaked_tokens.items())},
        "categories": dict(sorted(dataset.categories.items())),
    }
    (out / "truth.json").write_text(json.dumps(truth, sort_keys=True, indent=2) + "\n")
    (out / "synth.json").write_text(json.dumps(asdict(dataset.config), sort_keys=True, indent=2) + "\n")


def load_dataset(in_dir) -> SynthDataset:
    src = Path(in_dir)
    config = SynthConfig(**json.loads((src / "synth.json").read_text()))
    logs = load_event_logs(src / "logs.jsonl")
    taxonomy = load_taxonomy(src / "taxonomy.tsv")
    policies_raw = json.loads((src / "policies.json").read_text())
    policies = {
        ps: SanitizePolicy(
            frozenset(p["sensitive"]),
            {k: int(v) for k, v in p["generalize"].items()},
            int(p["default_depth"]),
        )
        for ps, p in policies_raw.items()
    }
    t = json.loads((src / "truth.json").read_text())
    truth = GroundTruth(
        t["topic_of"],
        {k: tuple(v) for k, v in t["topic_vocab"].items()},
        tuple(t["background_vocab"]),
        {k: tuple(v) for k, v in t["sensitive_tokens"].items()},
        {k: tuple(v) for k, v in t["leaked_tokens"].items()},
    )
    return SynthDataset(config, logs, taxonomy, policies, truth, t.get("categories", {}))
