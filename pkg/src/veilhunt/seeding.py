"""Deterministic RNG substreams so whole runs replay bit-identically.

Every source of randomness in a run is a ``random.Random`` derived from the
master run seed plus a label path, so independent protocol sessions can run
in any order (or in parallel) without perturbing each other's streams.
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(master_seed: int, *labels: object) -> int:
    h = hashlib.sha256()
    h.update(str(master_seed).encode())
    for label in labels:
        h.update(b"/")
        h.update(str(label).encode())
    return int.from_bytes(h.digest(), "big")


def derive_rng(master_seed: int, *labels: object) -> random.Random:
    return random.Random(derive_seed(master_seed, *labels))
