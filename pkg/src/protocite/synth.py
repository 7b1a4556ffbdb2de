"""Synthetic keyword-driven corpus generator.

Documents carry one or two target citations whose surrounding sentences
are built from per-label keyword vocabularies that are pairwise
disjoint; glue and filler words are shared across labels and carry no
label signal. Provision texts reuse exactly the label vocabulary, so
keyword masking derived from provisions removes the label signal while
random masking mostly hits neutral tokens.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus.citations import extract_citations
from .corpus.spans import extract_context_spans
from .corpus.types import CitationRef, ContextSpan, Document, LabelSet

# Real-looking references for the first labels; generated beyond.
_STOCK_REFS = [
    CitationRef(42, "1983"),
    CitationRef(11, "523", "a"),
    CitationRef(28, "1331"),
    CitationRef(28, "157", "b"),
    CitationRef(42, "1981"),
]

_STOCK_VOCABS = [
    ["immunity", "deprivation", "municipal", "officer", "badge", "color", "custom", "constitutional"],
    ["discharge", "debtor", "bankruptcy", "creditor", "nondischargeable", "estate", "trustee", "insolvency"],
    ["jurisdiction", "removal", "diversity", "forum", "venue", "remand", "statutory", "arising"],
    ["core", "proceeding", "referral", "adversary", "confirmation", "plan", "conversion", "stay"],
    ["contract", "enforcement", "racial", "discrimination", "employment", "promotion", "hiring", "tenure"],
]

_FILLER = ["court", "motion", "hearing", "counsel", "brief", "ruling", "docket", "clerk", "deadline", "transcript"]

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


@dataclass
class SyntheticCorpus:
    documents: list[Document]
    label_set: LabelSet

    def spans(self, window: int = 2, seed: int = 0) -> list[ContextSpan]:
        out: list[ContextSpan] = []
        for doc in self.documents:
            out.extend(extract_context_spans(doc, self.label_set, window, seed))
        return out


def label_vocabulary(label: int) -> list[str]:
    if label < len(_STOCK_VOCABS):
        return list(_STOCK_VOCABS[label])
    rng = np.random.default_rng([917, label])
    words = set()
    while len(words) < 8:
        syllables = [
            _CONSONANTS[rng.integers(len(_CONSONANTS))] + _VOWELS[rng.integers(len(_VOWELS))]
            for _ in range(3)
        ]
        words.add("".join(syllables) + f"{label}")
    return sorted(words)


def label_reference(label: int) -> CitationRef:
    if label < len(_STOCK_REFS):
        return _STOCK_REFS[label]
    return CitationRef(40 + label, str(1000 + 37 * label))


def provision_text(label: int) -> str:
    v = label_vocabulary(label)
    return (
        f"The {v[0]} and {v[1]} of any {v[2]} shall be {v[3]}. "
        f"Any {v[4]} under such {v[5]} shall be {v[6]} and {v[7]}. "
        f"No {v[0]} shall be {v[4]} without a showing of {v[2]} {v[6]}."
    )


def generate_corpus(
    n_labels: int = 3,
    n_docs: int = 100,
    seed: int = 0,
    window: int = 2,
    doc_prefix: str = "synth",
    two_label_fraction: float = 0.2,
) -> SyntheticCorpus:
    """Documents with exactly one citation sentence each (so one span per
    document at any window), plus the matching label set with provisions."""
    if n_labels < 2:
        raise ValueError("need at least 2 labels")
    refs = [label_reference(l) for l in range(n_labels)]
    label_set = LabelSet(
        labels=refs,
        provision_texts={refs[l].key: provision_text(l) for l in range(n_labels)},
    )
    documents = []
    for d in range(n_docs):
        rng = np.random.default_rng([seed, d])
        primary = int(rng.integers(n_labels))
        labels = [primary]
        if rng.random() < two_label_fraction:
            other = int(rng.integers(n_labels - 1))
            labels.append(other if other < primary else other + 1)
        text = _document_text(labels, refs, window, rng)
        documents.append(Document(f"{doc_prefix}-{d:05d}", text, extract_citations(text)))
    return SyntheticCorpus(documents, label_set)


def generate_split_corpora(
    n_labels: int = 3,
    n_train: int = 200,
    n_val: int = 25,
    n_test: int = 50,
    seed: int = 0,
    window: int = 2,
) -> tuple[SyntheticCorpus, SyntheticCorpus, SyntheticCorpus]:
    """Disjoint train/validation/test pools with exact span counts."""
    train = generate_corpus(n_labels, n_train, seed=seed * 3 + 0, window=window, doc_prefix="train")
    val = generate_corpus(n_labels, n_val, seed=seed * 3 + 1, window=window, doc_prefix="val")
    test = generate_corpus(n_labels, n_test, seed=seed * 3 + 2, window=window, doc_prefix="test")
    val.label_set = train.label_set
    test.label_set = train.label_set
    return train, val, test


def _document_text(labels: list[int], refs: list[CitationRef], window: int, rng: np.random.Generator) -> str:
    vocab = [w for l in labels for w in label_vocabulary(l)]
    sentences = []
    for _ in range(int(rng.integers(0, 3))):
        sentences.append(_filler_sentence(rng))
    for _ in range(window):
        sentences.append(_context_sentence(vocab, rng))
    cites = " and ".join(refs[l].citation_string() for l in labels)
    sentences.append(f"The court relied on {cites} in resolving this dispute.")
    for _ in range(window):
        sentences.append(_context_sentence(vocab, rng))
    for _ in range(int(rng.integers(0, 3))):
        sentences.append(_filler_sentence(rng))
    return " ".join(sentences)


def _context_sentence(vocab: list[str], rng: np.random.Generator) -> str:
    picks = [vocab[i] for i in rng.choice(len(vocab), size=3, replace=False)]
    return f"The {picks[0]} issue turned on {picks[1]} and a showing of {picks[2]}."


def _filler_sentence(rng: np.random.Generator) -> str:
    picks = [_FILLER[i] for i in rng.choice(len(_FILLER), size=3, replace=False)]
    return f"The {picks[0]} noted the {picks[1]} before the {picks[2]}."
