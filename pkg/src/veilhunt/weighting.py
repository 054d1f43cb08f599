"""Term-frequency / inverse-log-frequency event weighting and gateway similarity.

The similarity metric divides twice the shared-token count by the SUM OF
SQUARED set cardinalities.  That denominator is kept as primary on purpose
(classical Dice would divide by |Vc| + |Vd|); ``classic_dice`` computes the
classical variant side by side so experiments can run either reading.
Cardinalities here are counts of nonzero-weight tokens, which is exactly
what the private pairwise intersection protocol can compute.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

from .model import EventVector, SanitizedLog, Token

LOG_BASES = {"e": math.e, "2": 2.0, "10": 10.0}


class WeightingError(ValueError):
    pass


@dataclass(frozen=True)
class CorpusStats:
    """Run-wide document frequencies: how many sanitized logs contain each token."""

    gateway_count: int
    log_frequency: Mapping[Token, int]

    def validate(self) -> None:
        if self.gateway_count <= 0:
            raise WeightingError("gateway_count must be positive")
        for token, n in self.log_frequency.items():
            if not 1 <= n <= self.gateway_count:
                raise WeightingError(
                    f"log frequency of {token!r} is {n}, outside [1, {self.gateway_count}]"
                )


def build_corpus_stats(logs: Iterable[SanitizedLog]) -> CorpusStats:
    logs = list(logs)
    freq: Counter[Token] = Counter()
    for log in logs:
        freq.update(log.tokens())
    return CorpusStats(len(logs), dict(freq))


def term_frequency(log: SanitizedLog, token: Token) -> float:
    """count(token in log) / total records; 0 when absent."""
    if not log.records:
        raise WeightingError("term frequency of an empty log is undefined")
    hits = sum(1 for rec in log.records if rec.event_id == token)
    return hits / len(log.records)


def inverse_log_frequency(stats: CorpusStats, token: Token, base: str = "e") -> float:
    """log(gateway_count / #logs containing token), in the configured base."""
    n = stats.log_frequency.get(token, 0)
    if n < 1:
        raise WeightingError(f"token {token!r} appears in no log and cannot be weighted")
    return math.log(stats.gateway_count / n) / math.log(LOG_BASES[base])


def build_event_vector(log: SanitizedLog, stats: CorpusStats, base: str = "e") -> EventVector:
    """TF x ILF per distinct token; zero-weight entries (tokens present in
    every log) are omitted from the weights but stay vector tokens."""
    if not log.records:
        raise WeightingError("cannot build an event vector from an empty log")
    counts = Counter(rec.event_id for rec in log.records)
    total = len(log.records)
    weights: dict[Token, float] = {}
    for token, hits in counts.items():
        ilf = inverse_log_frequency(stats, token, base)
        w = (hits / total) * ilf
        if w > 0.0:
            weights[token] = w
    return EventVector(log.gateway, weights, frozenset(counts))


def similarity_from_counts(intersection: int, size_a: int, size_b: int) -> float:
    """The primary similarity: 2*|A & B| / (|A|^2 + |B|^2)."""
    denom = size_a * size_a + size_b * size_b
    if denom == 0:
        return 0.0
    return 2.0 * intersection / denom


def classic_dice_from_counts(intersection: int, size_a: int, size_b: int) -> float:
    """Classical Dice coefficient 2*|A & B| / (|A| + |B|), reported side by side."""
    denom = size_a + size_b
    if denom == 0:
        return 0.0
    return 2.0 * intersection / denom


def gateways_similarity(vec_a: EventVector, vec_b: EventVector, classic_dice: bool = False) -> float:
    """Similarity of two gateways from their vectors' full token sets (one
    entry per unique event of the source log, zero-weighted or not)."""
    shared = len(vec_a.tokens & vec_b.tokens)
    if classic_dice:
        return classic_dice_from_counts(shared, len(vec_a.tokens), len(vec_b.tokens))
    return similarity_from_counts(shared, len(vec_a.tokens), len(vec_b.tokens))
