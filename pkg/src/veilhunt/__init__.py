"""Privacy-preserving clustering of smart-home gateways into threat groups.

Gateways sanitize their event logs locally, run a blind-signature private
set intersection to rank pairwise similarity, cluster into virtual threat
groups, then mine shared frequent events through an anonymous commutative
encryption ring to form and refine real threat groups, all without any raw
sensitive token leaving its owner's gateway.
"""

__version__ = "0.1.0"

from .model import (
    Event,
    EventLog,
    EventVector,
    GatewayId,
    RealThreatGroup,
    SanitizedLog,
    TaxonomyTree,
    VirtualThreatGroup,
    canonical_decode,
    canonical_encode,
    groups_are_disjoint,
)
from .sanitize import SanitizePolicy, generalize, sanitize
from .weighting import CorpusStats, build_corpus_stats, build_event_vector, gateways_similarity

__all__ = [
    "Event",
    "EventLog",
    "EventVector",
    "GatewayId",
    "RealThreatGroup",
    "SanitizedLog",
    "TaxonomyTree",
    "VirtualThreatGroup",
    "SanitizePolicy",
    "CorpusStats",
    "canonical_decode",
    "canonical_encode",
    "groups_are_disjoint",
    "generalize",
    "sanitize",
    "build_corpus_stats",
    "build_event_vector",
    "gateways_similarity",
]
