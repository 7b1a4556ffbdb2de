"""Corpus statistics: citation frequency tables and per-document counts."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .types import Document, LabelSet


@dataclass
class CorpusStats:
    """Per-label citing-document counts plus per-document target counts."""

    label_doc_counts: list[tuple[str, int]] = field(default_factory=list)
    doc_citation_counts: list[tuple[str, int]] = field(default_factory=list)
    mean_citations_per_doc: float = 0.0

    def to_tsv(self) -> str:
        lines = ["label\tciting_documents"]
        lines += [f"{key}\t{count}" for key, count in self.label_doc_counts]
        lines.append("")
        lines.append("document\ttarget_citations")
        lines += [f"{doc}\t{count}" for doc, count in self.doc_citation_counts]
        lines.append("")
        lines.append(f"mean_citations_per_document\t{self.mean_citations_per_doc:.4f}")
        return "\n".join(lines) + "\n"


def corpus_stats(corpus: Sequence[Document], label_set: LabelSet) -> CorpusStats:
    """Tally label frequencies over the corpus, sorted descending.

    Long-tail label distributions show up directly in the first table;
    the second table feeds per-document citation-count summaries.
    """
    target_keys = set(label_set.keys())
    label_counts = {key: 0 for key in label_set.keys()}
    doc_counts: list[tuple[str, int]] = []
    for doc in corpus:
        present = doc.citation_keys() & target_keys
        for key in present:
            label_counts[key] += 1
        doc_counts.append((doc.id, sum(1 for ref, _ in doc.citations if ref.key in target_keys)))
    ranked = sorted(label_counts.items(), key=lambda kv: (-kv[1], kv[0]))
    doc_counts.sort(key=lambda kv: (-kv[1], kv[0]))
    mean = (
        sum(count for _, count in doc_counts) / len(doc_counts) if doc_counts else 0.0
    )
    if not corpus:
        return CorpusStats()
    return CorpusStats(ranked, doc_counts, mean)
