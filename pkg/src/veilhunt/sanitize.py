"""Local concealment: suppression and hypernym generalization of event logs.

"Same semantic level" is realized as a fixed-depth taxonomy cut: each token
is replaced by its ancestor at the configured depth from the root.
Suppressed records are removed outright (a placeholder would leak per-event
counts); their originals never leave the owner's store.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

from .model import EventLog, SanitizedLog, TaxonomyTree, Token


class PolicyError(ValueError):
    pass


@dataclass(frozen=True)
class SanitizePolicy:
    """Owner policy: which tokens to suppress, which depth to generalize to."""

    sensitive_events: frozenset[Token]
    generalize_events: Mapping[Token, int] = field(default_factory=dict)
    default_depth: int = 1

    def validate(self, taxonomy: TaxonomyTree) -> None:
        overlap = self.sensitive_events & set(self.generalize_events)
        if overlap:
            raise PolicyError(f"tokens both sensitive and generalized: {sorted(overlap)}")
        if self.default_depth < 0:
            raise PolicyError("default_depth must be nonnegative")
        nodes = taxonomy.nodes
        for token in sorted(self.sensitive_events | set(self.generalize_events)):
            if token not in nodes:
                raise PolicyError(f"policy references unknown taxonomy token: {token!r}")

    def depth_for(self, token: Token) -> int:
        return self.generalize_events.get(token, self.default_depth)


def generalize(token: Token, taxonomy: TaxonomyTree, depth: int) -> Token:
    """Ancestor of the token at the given depth from the root.

    Tokens already at or above the target depth are returned unchanged; the
    result always lies on the token's root path.
    """
    if depth < 0:
        raise PolicyError("generalization depth must be nonnegative")
    path = taxonomy.path_to_root(token)  # [root, ..., token]
    if depth >= len(path) - 1:
        return token
    return path[depth]


def sanitize(log: EventLog, taxonomy: TaxonomyTree, policy: SanitizePolicy) -> SanitizedLog:
    """Produce the public counterpart of a sensitive log under an owner policy."""
    policy.validate(taxonomy)
    log.validate()
    kept = []
    suppressed = 0
    for rec in log.records:
        if rec.event_id in policy.sensitive_events:
            suppressed += 1
            continue
        hypernym = generalize(rec.event_id, taxonomy, policy.depth_for(rec.event_id))
        kept.append(rec if hypernym == rec.event_id else _relabel(rec, hypernym))
    return SanitizedLog(log.gateway, tuple(kept), suppressed)


def sanitize_again(log: SanitizedLog, taxonomy: TaxonomyTree, policy: SanitizePolicy) -> SanitizedLog:
    """Re-run sanitization on an already-sanitized log (idempotence checks)."""
    inner = EventLog(log.gateway, log.records)
    redone = sanitize(inner, taxonomy, policy)
    return SanitizedLog(log.gateway, redone.records, log.suppressed_count + redone.suppressed_count)


def _relabel(rec, hypernym: Token):
    from .model import Event

    return Event(hypernym, rec.device_id, rec.timestamp, rec.attrs)


def save_policy(policy: SanitizePolicy, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "sensitive": sorted(policy.sensitive_events),
                "generalize": dict(sorted(policy.generalize_events.items())),
                "default_depth": policy.default_depth,
            },
            fh,
            sort_keys=True,
            indent=2,
        )


def load_policy(path) -> SanitizePolicy:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    return SanitizePolicy(
        sensitive_events=frozenset(obj.get("sensitive", [])),
        generalize_events={k: int(v) for k, v in obj.get("generalize", {}).items()},
        default_depth=int(obj.get("default_depth", 1)),
    )
