"""Line-oriented corpus and span file formats.

Corpus input: one JSON object per line, {"id": str, "text": str}, with
an optional pre-extracted "citations" array (trusted when present) of
{"title": int, "section": str, "subsection": str|null, "offset": int}.

Span files: one JSON object per line, {"doc_id": str, "sentences":
[str], "labels": [int]} where labels index into the label-set order.
Span identity for embedding files is "<doc_id>#<j>" with j the 0-based
index among the document's spans in file order.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .citations import extract_citations
from .types import CitationRef, ContextSpan, CorpusError, Document


def read_corpus_file(path: str | Path) -> list[Document]:
    docs = []
    seen: set[str] = set()
    for line_no, line in enumerate(_lines(path), 1):
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{path}:{line_no}: invalid JSON ({exc})") from exc
        if "id" not in record or "text" not in record:
            raise CorpusError(f"{path}:{line_no}: record needs 'id' and 'text'")
        if record["id"] in seen:
            raise CorpusError(f"{path}:{line_no}: duplicate document id {record['id']!r}")
        seen.add(record["id"])
        if "citations" in record:
            citations = [
                (CitationRef(c["title"], c["section"], c.get("subsection")), c["offset"])
                for c in record["citations"]
            ]
        else:
            citations = extract_citations(record["text"])
        docs.append(Document(record["id"], record["text"], citations))
    return docs


def write_corpus_file(docs: Sequence[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            record = {
                "id": doc.id,
                "text": doc.text,
                "citations": [
                    {
                        "title": ref.title,
                        "section": ref.section,
                        "subsection": ref.subsection,
                        "offset": offset,
                    }
                    for ref, offset in doc.citations
                ],
            }
            fh.write(json.dumps(record, separators=(",", ":")) + "\n")


def write_span_file(spans: Iterable[ContextSpan], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for span in spans:
            record = {
                "doc_id": span.doc_id,
                "sentences": span.sentences,
                "labels": span.label_indices(),
            }
            fh.write(json.dumps(record, separators=(",", ":")) + "\n")


def read_span_file(path: str | Path, n_labels: int) -> list[ContextSpan]:
    spans = []
    for line_no, line in enumerate(_lines(path), 1):
        record = json.loads(line)
        vector = np.zeros(n_labels, dtype=np.uint8)
        for idx in record["labels"]:
            if not 0 <= idx < n_labels:
                raise CorpusError(f"{path}:{line_no}: label index {idx} out of range")
            vector[idx] = 1
        spans.append(ContextSpan(record["doc_id"], record["sentences"], vector))
    return spans


def span_uid(doc_id: str, ordinal: int) -> str:
    """Stable span identifier used to key embedding-file records."""
    return f"{doc_id}#{ordinal}"


def span_uids(spans: Sequence[ContextSpan]) -> list[str]:
    """Identifiers for spans in file order (per-document ordinals)."""
    counters: dict[str, int] = {}
    uids = []
    for span in spans:
        ordinal = counters.get(span.doc_id, 0)
        counters[span.doc_id] = ordinal + 1
        uids.append(span_uid(span.doc_id, ordinal))
    return uids


def _lines(path: str | Path) -> Iterable[str]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield line
