import numpy as np
import pytest

from protocite.corpus import CitationRef, ContextSpan, Document, LabelSet, extract_citations


@pytest.fixture
def three_label_set() -> LabelSet:
    refs = [CitationRef(42, "1983"), CitationRef(11, "523", "a"), CitationRef(28, "1331")]
    return LabelSet(
        labels=refs,
        provision_texts={r.key: f"Provision text for {r.key}." for r in refs},
    )


def make_doc(doc_id: str, sentences: list[str]) -> Document:
    text = " ".join(sentences)
    return Document(doc_id, text, extract_citations(text))


def make_span(doc_id: str, n_labels: int, labels: list[int], sentences=None) -> ContextSpan:
    vec = np.zeros(n_labels, dtype=np.uint8)
    for i in labels:
        vec[i] = 1
    return ContextSpan(doc_id, sentences or ["Some sentence."], vec)
