"""Context span extraction: sentence windows around citation sites.

Each sentence containing a target citation contributes a window of the
surrounding sentences; overlapping windows within one document merge
into a single span. Documents without any target citation fall back to
a seeded uniform sample of at least 15 sentences (or the whole
document, whichever is smaller).
"""

from __future__ import annotations

import numpy as np

from .cleaning import clean_text_tracked, strip_tracking, tracked_indices
from .sentences import split_sentences
from .types import ContextSpan, Document, LabelSet

FALLBACK_MIN_SENTENCES = 15


def extract_context_spans(
    doc: Document,
    label_set: LabelSet,
    window: int,
    seed: int = 0,
) -> list[ContextSpan]:
    """Spans for one document, in sentence order. Empty document: no spans."""
    targets = {ref.key for ref, _ in doc.citations if label_set.index_of(ref.key) is not None}
    cleaned = clean_text_tracked(doc.text, doc.citations, targets)
    sentences = split_sentences(cleaned)
    if not sentences:
        return []

    # Which target label indices occur in which sentence.
    labels_at: list[list[int]] = []
    for sent in sentences:
        hits = []
        for cit_idx in tracked_indices(sent):
            ref, _ = doc.citations[cit_idx]
            label = label_set.index_of(ref.key)
            if label is not None:
                hits.append(label)
        labels_at.append(hits)

    cited = [i for i, hits in enumerate(labels_at) if hits]
    if not cited:
        return [_fallback_span(doc.id, sentences, label_set.n, seed)]

    intervals = _merge_windows(cited, window, len(sentences))
    spans = []
    for lo, hi in intervals:
        vector = np.zeros(label_set.n, dtype=np.uint8)
        for i in range(lo, hi + 1):
            for label in labels_at[i]:
                vector[label] = 1
        body = [strip_tracking(sentences[i]) for i in range(lo, hi + 1)]
        spans.append(ContextSpan(doc.id, body, vector))
    return spans


def _merge_windows(cited: list[int], window: int, n_sentences: int) -> list[tuple[int, int]]:
    """Clip windows at document bounds and merge overlapping intervals."""
    merged: list[tuple[int, int]] = []
    for i in cited:
        lo = max(0, i - window)
        hi = min(n_sentences - 1, i + window)
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def _fallback_span(doc_id: str, sentences: list[str], n_labels: int, seed: int) -> ContextSpan:
    count = min(FALLBACK_MIN_SENTENCES, len(sentences))
    rng = np.random.default_rng([seed, _stable_doc_entropy(doc_id)])
    picked = sorted(rng.choice(len(sentences), size=count, replace=False).tolist())
    body = [strip_tracking(sentences[i]) for i in picked]
    return ContextSpan(doc_id, body, np.zeros(n_labels, dtype=np.uint8))


def _stable_doc_entropy(doc_id: str) -> int:
    import hashlib

    digest = hashlib.blake2b(doc_id.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")
