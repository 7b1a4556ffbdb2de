"""Prototype-based evidence for predictions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .prototypes import Prototype
from .training import PredictionResult


@dataclass
class Evidence:
    label_index: int
    kind: str
    source: str
    score: float


def explain(
    result: PredictionResult,
    prototypes: Sequence[Prototype],
    top_k: int = 3,
) -> dict[int, list[Evidence]]:
    """For each predicted label, its top_k most similar prototypes.

    ``result.similarities`` is aligned with the prototype dump order.
    Precedent evidence cites the source training sample; provision
    evidence cites the provision key. Ties order by source id.
    """
    if len(result.similarities) != len(prototypes):
        raise ValueError(
            f"similarity vector ({len(result.similarities)}) does not match "
            f"prototype count ({len(prototypes)})"
        )
    evidence: dict[int, list[Evidence]] = {}
    for label in [int(i) for i in result.predicted.nonzero()[0]]:
        candidates = [
            Evidence(p.label_index, p.kind, p.source, float(result.similarities[j]))
            for j, p in enumerate(prototypes)
            if p.label_index == label
        ]
        candidates.sort(key=lambda e: (-e.score, e.source))
        evidence[label] = candidates[:top_k]
    return evidence
