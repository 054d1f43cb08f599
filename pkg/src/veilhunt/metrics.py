"""Precision/recall scoring of extracted groups against the planted truth.

Each extracted group is matched independently to the planted topic with the
largest member overlap (deterministic tie-break on topic id), so a catch-all
group scores full recall but poor precision against its best topic.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .synth import GroundTruth


@dataclass(frozen=True)
class GroupScore:
    group_id: str
    topic_id: str
    overlap: int
    precision: float
    recall: float

    @property
    def f1(self) -> float:
        if self.precision + self.recall == 0:
            return 0.0
        return 2 * self.precision * self.recall / (self.precision + self.recall)


@dataclass(frozen=True)
class Evaluation:
    per_group: tuple[GroupScore, ...]
    macro_precision: float
    macro_recall: float
    macro_f1: float


def evaluate(groups: Sequence[tuple[str, Iterable[str]]], truth: GroundTruth) -> Evaluation:
    """Score (group_id, member pseudonyms) pairs against the planted topics."""
    for _, members in groups:
        for ps in members:
            if ps not in truth.topic_of:
                raise ValueError(f"gateway {ps!r} does not appear in the ground truth")
    topics = sorted(set(truth.topic_of.values()))
    members_of = {topic: truth.members_of(topic) for topic in topics}

    scores = []
    for group_id, members in groups:
        members = set(members)
        if not members:
            continue
        topic = min(topics, key=lambda t: (-len(members & members_of[t]), t))
        overlap = len(members & members_of[topic])
        scores.append(
            GroupScore(
                group_id,
                topic,
                overlap,
                precision=overlap / len(members),
                recall=overlap / len(members_of[topic]) if members_of[topic] else 0.0,
            )
        )
    if not scores:
        return Evaluation((), 0.0, 0.0, 0.0)
    macro_p = sum(s.precision for s in scores) / len(scores)
    macro_r = sum(s.recall for s in scores) / len(scores)
    macro_f = sum(s.f1 for s in scores) / len(scores)
    return Evaluation(tuple(scores), macro_p, macro_r, macro_f)


def write_metrics_csv(evaluation: Evaluation, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "matched_topic", "overlap", "precision", "recall", "f1"])
        for s in evaluation.per_group:
            writer.writerow([s.group_id, s.topic_id, s.overlap, f"{s.precision:.6f}", f"{s.recall:.6f}", f"{s.f1:.6f}"])
        writer.writerow(
            ["macro", "", "", f"{evaluation.macro_precision:.6f}", f"{evaluation.macro_recall:.6f}", f"{evaluation.macro_f1:.6f}"]
        )


def groups_from_doc(groups_doc: Mapping) -> list[tuple[str, list[str]]]:
    """Flatten a groups.json document into (group id, members) pairs."""
    out = []
    for vc in groups_doc["virtual_groups"]:
        for group in vc["groups"]:
            out.append((group["id"], list(group["members"])))
    return out
