"""The semi-honest adversary's dictionary attack on recorded transcripts.

The attacker is the coordinator itself: it holds every relayed payload and
the public taxonomy.  It hashes every public token in every digest form the
protocols use and matches those against every integer it ever saw; matched
multi-token set digests are expanded from already-recovered tokens.  Raw
sensitive tokens that were suppressed at the gateways never reach any
payload, so the attack can recover only hypernym phrases and whatever the
leak scenario disclosed on purpose.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .crypto import digest_int, hash_to_group
from .model import Token, encode_token, encode_token_set


@dataclass(frozen=True)
class AttackReport:
    hypernyms_recovered: tuple[Token, ...]
    leaked_recovered: tuple[Token, ...]
    suppressed_recovered: tuple[Token, ...]
    matched_values: int
    scanned_values: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "hypernyms_recovered": list(self.hypernyms_recovered),
                "leaked_recovered": list(self.leaked_recovered),
                "suppressed_recovered": list(self.suppressed_recovered),
                "counts": {
                    "hypernyms": len(self.hypernyms_recovered),
                    "leaked": len(self.leaked_recovered),
                    "suppressed": len(self.suppressed_recovered),
                    "matched_values": self.matched_values,
                    "scanned_values": self.scanned_values,
                },
            },
            sort_keys=True,
            indent=2,
        )


def _walk_values(obj, out: set[int]) -> None:
    if isinstance(obj, bool):
        return
    if isinstance(obj, int):
        out.add(obj)
    elif isinstance(obj, str):
        if obj.isdigit():
            out.add(int(obj))
    elif isinstance(obj, list):
        for item in obj:
            _walk_values(item, out)
    elif isinstance(obj, dict):
        for k, v in obj.items():
            _walk_values(k, out)
            _walk_values(v, out)


def collect_observed_values(transcript_lines: Iterable[str]) -> tuple[set[int], int | None]:
    """Every integer the coordinator observed, plus the published cipher prime
    (read from the run-params message like any other observer could)."""
    observed: set[int] = set()
    comm_prime: int | None = None
    for line in transcript_lines:
        obj = json.loads(line)
        payload = obj.get("payload")
        if obj.get("step") == "run-params" and isinstance(payload, dict):
            comm_prime = payload.get("comm_prime", comm_prime)
        _walk_values(payload, observed)
    return observed, comm_prime


@dataclass
class DictionaryAttack:
    vocabulary: tuple[Token, ...]
    comm_prime: int | None = None
    max_set_size: int = 3
    recovered: set[Token] = field(default_factory=set)

    def _token_forms(self, token: Token) -> list[int]:
        forms = [
            digest_int(encode_token(token)),
            digest_int(encode_token_set({token})),
        ]
        if self.comm_prime:
            forms.append(hash_to_group(encode_token(token), self.comm_prime))
            forms.append(hash_to_group(encode_token_set({token}), self.comm_prime))
        return forms

    def run(self, observed: set[int]) -> int:
        """Match the dictionary against observed values; returns match count."""
        matched = 0
        for token in self.vocabulary:
            if any(form in observed for form in self._token_forms(token)):
                self.recovered.add(token)
                matched += 1
        # expand multi-token set digests from recovered singles
        singles = sorted(self.recovered)
        for size in range(2, self.max_set_size + 1):
            for combo in itertools.combinations(singles, size):
                s = frozenset(combo)
                forms = [digest_int(encode_token_set(s))]
                if self.comm_prime:
                    forms.append(hash_to_group(encode_token_set(s), self.comm_prime))
                if any(form in observed for form in forms):
                    matched += 1
        return matched


def leakage_attack(
    transcript_lines: Sequence[str],
    vocabulary: Iterable[Token],
    leaked: Iterable[Token],
    sensitive: Iterable[Token],
) -> AttackReport:
    """Mount the dictionary attack over everything the coordinator stored.

    ``leaked`` tokens are flagged as recovered by construction: disclosing
    them in a public sanitized log is the exposure.  ``sensitive`` is ground
    truth used only to classify what the dictionary matched.
    """
    vocabulary = tuple(sorted(set(vocabulary)))
    leaked = set(leaked)
    sensitive = set(sensitive)

    observed, comm_prime = collect_observed_values(transcript_lines)
    attack = DictionaryAttack(vocabulary, comm_prime)
    matched = attack.run(observed)

    recovered = attack.recovered | leaked
    hypernyms = tuple(sorted(recovered - sensitive))
    leaked_hit = tuple(sorted(recovered & leaked))
    suppressed_hit = tuple(sorted((recovered & sensitive) - leaked))
    return AttackReport(hypernyms, leaked_hit, suppressed_hit, matched, len(observed))
