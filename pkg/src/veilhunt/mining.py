"""Level-wise frequent-event mining over per-day transaction buckets.

A transaction is the set of event tokens one gateway logged in one day
(86400-second buckets); supports are transaction counts.  The closure of a
frequent set holds every token co-occurring in at least ``min_closure`` of
its supporting transactions (1.0 reproduces strict co-occurrence).
Everything runs locally on a single gateway's data; aggregation into global
catalogs happens in the insights protocol.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .model import EventLog, GatewayId, SanitizedLog, Token

SECONDS_PER_DAY = 86400

DEFAULT_MIN_SUPPORT = 0.3
DEFAULT_MIN_CLOSURE = 0.5
DEFAULT_MAX_SET_SIZE = 3


@dataclass(frozen=True)
class FrequentEventSet:
    """An event set with its support bookkeeping.

    ``local_support`` maps contributing gateways to their transaction counts.
    For a freshly mined local result it holds only the owner; after global
    aggregation it is simulator ground truth for verification and is never
    reconstructed from protocol messages (those are unattributable).
    """

    events: frozenset[Token]
    local_support: Mapping[GatewayId, int] = field(default_factory=dict)
    global_support: int = 0
    closure: frozenset[Token] = frozenset()

    @property
    def size(self) -> int:
        return len(self.events)

    def validate(self) -> None:
        if not self.events:
            raise ValueError("a frequent event set cannot be empty")
        if self.local_support and self.global_support != sum(self.local_support.values()):
            raise ValueError("global support must equal the sum of local supports")
        if self.closure and not self.closure >= self.events:
            raise ValueError("closure must contain the defining events")


def day_transactions(log: EventLog | SanitizedLog) -> list[frozenset[Token]]:
    """Per-day token sets, in day order; empty days are skipped."""
    buckets: dict[int, set[Token]] = {}
    for rec in log.records:
        buckets.setdefault(rec.timestamp // SECONDS_PER_DAY, set()).add(rec.event_id)
    return [frozenset(buckets[day]) for day in sorted(buckets)]


def meets_support(count: int, total: int, min_support: float) -> bool:
    return total > 0 and count / total >= min_support


def set_closure(
    events: frozenset[Token],
    transactions: Sequence[frozenset[Token]],
    min_closure: float,
) -> frozenset[Token]:
    """Tokens appearing in >= min_closure of the transactions supporting ``events``."""
    supporters = [t for t in transactions if events <= t]
    if not supporters:
        return frozenset(events)
    co_counts: Counter[Token] = Counter()
    for t in supporters:
        co_counts.update(t)
    closure = {tok for tok, n in co_counts.items() if n / len(supporters) >= min_closure}
    return frozenset(closure | events)


def local_frequent_events(
    log: EventLog | SanitizedLog,
    candidates: Iterable[Token] | None = None,
    min_support: float = DEFAULT_MIN_SUPPORT,
    min_closure: float = DEFAULT_MIN_CLOSURE,
    max_size: int = DEFAULT_MAX_SET_SIZE,
) -> list[FrequentEventSet]:
    """All event sets (up to max_size) meeting min_support on this log.

    ``candidates`` restricts the token universe; None means every token the
    log contains.  An explicitly empty catalog yields an empty result.
    """
    if not 0.0 < min_support <= 1.0:
        raise ValueError(f"min_support must be in (0, 1], got {min_support}")
    if candidates is not None:
        universe = frozenset(candidates)
        if not universe:
            return []
        transactions = [t & universe for t in day_transactions(log)]
        transactions = [t for t in transactions if t]
    else:
        transactions = day_transactions(log)
    total = len(day_transactions(log))
    if total == 0:
        return []

    owner = log.gateway
    results: list[FrequentEventSet] = []

    counts: Counter[Token] = Counter()
    for t in transactions:
        counts.update(t)
    level: list[frozenset[Token]] = sorted(
        (frozenset({tok}) for tok, n in counts.items() if meets_support(n, total, min_support)),
        key=lambda s: sorted(s),
    )
    for s in level:
        tok = next(iter(s))
        results.append(
            FrequentEventSet(s, {owner: counts[tok]}, counts[tok], set_closure(s, transactions, min_closure))
        )

    size = 1
    while level and size < max_size:
        frequent_here = set(level)
        candidates_next = set()
        for a, b in itertools.combinations(level, 2):
            joined = a | b
            if len(joined) != size + 1:
                continue
            if all(joined - {tok} in frequent_here for tok in joined):
                candidates_next.add(joined)
        next_level = []
        for s in sorted(candidates_next, key=lambda s: sorted(s)):
            n = sum(1 for t in transactions if s <= t)
            if meets_support(n, total, min_support):
                next_level.append(s)
                results.append(
                    FrequentEventSet(s, {owner: n}, n, set_closure(s, transactions, min_closure))
                )
        level = next_level
        size += 1

    results.sort(key=lambda fs: (fs.size, sorted(fs.events)))
    return results
