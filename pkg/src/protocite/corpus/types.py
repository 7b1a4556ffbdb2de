"""Core domain records: documents, citation references, label sets, spans."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class CorpusError(ValueError):
    """Raised for malformed corpus inputs or impossible label-set requests."""


@dataclass(frozen=True)
class CitationRef:
    """A U.S. Code reference: title, section and optional subsection.

    Equality is field-wise; the canonical key renders as
    ``"42 §1983"`` or ``"11 §523(a)"`` when a subsection is present.
    """

    title: int
    section: str
    subsection: str | None = None

    def __post_init__(self):
        if self.title <= 0:
            raise CorpusError(f"citation title must be positive, got {self.title}")
        if not self.section:
            raise CorpusError("citation section must be non-empty")

    @property
    def key(self) -> str:
        if self.subsection:
            return f"{self.title} §{self.section}({self.subsection})"
        return f"{self.title} §{self.section}"

    def citation_string(self) -> str:
        """Render in the source-text form the extractor recognizes."""
        base = f"{self.title} U.S.C. § {self.section}"
        return f"{base}({self.subsection})" if self.subsection else base

    @classmethod
    def from_key(cls, key: str) -> "CitationRef":
        title_part, _, rest = key.partition("§")
        rest = rest.strip()
        sub = None
        if rest.endswith(")") and "(" in rest:
            rest, _, sub_part = rest.partition("(")
            sub = sub_part[:-1]
        if not title_part.strip().isdigit():
            raise CorpusError(f"unparseable citation key: {key!r}")
        return cls(int(title_part.strip()), rest.strip(), sub)


@dataclass
class Document:
    """A raw text plus its extracted citations as (ref, character offset)."""

    id: str
    text: str
    citations: list[tuple[CitationRef, int]] = field(default_factory=list)

    def __post_init__(self):
        if not self.id:
            raise CorpusError("document id must be non-empty")
        if not self.text:
            raise CorpusError(f"document {self.id!r} has empty text")
        for ref, offset in self.citations:
            if not 0 <= offset < len(self.text):
                raise CorpusError(
                    f"document {self.id!r}: offset {offset} for {ref.key} out of bounds"
                )

    def citation_keys(self) -> set[str]:
        return {ref.key for ref, _ in self.citations}


@dataclass
class LabelSet:
    """Ordered target labels with provision texts and procedural flags.

    Label order is fixed for the life of an experiment: indices into
    ``labels`` are the coordinates of every label vector downstream.
    """

    labels: list[CitationRef]
    provision_texts: dict[str, str] = field(default_factory=dict)
    procedural: dict[str, bool] = field(default_factory=dict)

    def __post_init__(self):
        keys = [ref.key for ref in self.labels]
        if len(set(keys)) != len(keys):
            raise CorpusError("duplicate labels in label set")
        self._index = {key: i for i, key in enumerate(keys)}
        for key in keys:
            self.provision_texts.setdefault(key, "")
            self.procedural.setdefault(key, False)

    @property
    def n(self) -> int:
        return len(self.labels)

    def index_of(self, key: str) -> int | None:
        return self._index.get(key)

    def keys(self) -> list[str]:
        return [ref.key for ref in self.labels]

    def missing_provisions(self) -> list[str]:
        return [k for k in self.keys() if not self.provision_texts.get(k, "").strip()]


@dataclass
class ContextSpan:
    """A sentence window with a binary label vector over a LabelSet."""

    doc_id: str
    sentences: list[str]
    label_vector: np.ndarray

    def __post_init__(self):
        if not self.sentences:
            raise CorpusError(f"span for document {self.doc_id!r} has no sentences")
        self.label_vector = np.asarray(self.label_vector, dtype=np.uint8)

    @property
    def text(self) -> str:
        return " ".join(self.sentences)

    def label_indices(self) -> list[int]:
        return [int(i) for i in np.nonzero(self.label_vector)[0]]
