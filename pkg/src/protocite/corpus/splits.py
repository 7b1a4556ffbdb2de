"""Document-level dataset splitting."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .types import ContextSpan, CorpusError


def split_dataset(
    spans: Sequence[ContextSpan],
    ratios: tuple[float, float, float],
    seed: int = 0,
) -> tuple[list[ContextSpan], list[ContextSpan], list[ContextSpan]]:
    """Split spans into (train, validation, test) at the document level.

    All spans of a document land in one partition. Membership depends
    only on the sorted document-id set, the seed and the ratios, never
    on span order or multiplicity. Partition sizes use exact
    largest-remainder apportionment, so 100 documents at (0.8, 0.05,
    0.15) give 80/5/15.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise CorpusError(f"split ratios must sum to 1, got {ratios}")
    if any(r < 0 for r in ratios):
        raise CorpusError(f"split ratios must be non-negative, got {ratios}")
    doc_ids = sorted({s.doc_id for s in spans})
    counts = _apportion(len(doc_ids), ratios)
    if any(c == 0 for c in counts):
        raise CorpusError(
            f"{len(doc_ids)} documents cannot fill all partitions at ratios {ratios}"
        )
    order = np.random.default_rng(seed).permutation(len(doc_ids))
    shuffled = [doc_ids[i] for i in order]
    assignment: dict[str, int] = {}
    cursor = 0
    for part, count in enumerate(counts):
        for doc_id in shuffled[cursor : cursor + count]:
            assignment[doc_id] = part
        cursor += count
    parts: tuple[list[ContextSpan], ...] = ([], [], [])
    for span in spans:
        parts[assignment[span.doc_id]].append(span)
    return parts


def _apportion(total: int, ratios: tuple[float, float, float]) -> list[int]:
    raw = [total * r for r in ratios]
    counts = [int(np.floor(x)) for x in raw]
    remainders = [(raw[i] - counts[i], -i) for i in range(len(ratios))]
    leftover = total - sum(counts)
    for _, neg_i in sorted(remainders, reverse=True)[:leftover]:
        counts[-neg_i] += 1
    return counts
