"""Corpus ingestion: citation extraction, cleaning, spans, labels, splits."""

from .citations import extract_citations
from .cleaning import MASK_TOKEN, clean_text
from .io import (
    read_corpus_file,
    read_span_file,
    span_uid,
    span_uids,
    write_corpus_file,
    write_span_file,
)
from .labels import build_label_set, read_exclusion_file, read_label_file, write_label_file
from .sentences import split_sentences
from .spans import extract_context_spans
from .splits import split_dataset
from .stats import CorpusStats, corpus_stats
from .types import CitationRef, ContextSpan, CorpusError, Document, LabelSet

__all__ = [
    "CitationRef",
    "ContextSpan",
    "CorpusError",
    "CorpusStats",
    "Document",
    "LabelSet",
    "MASK_TOKEN",
    "build_label_set",
    "clean_text",
    "corpus_stats",
    "extract_citations",
    "extract_context_spans",
    "read_corpus_file",
    "read_exclusion_file",
    "read_label_file",
    "read_span_file",
    "span_uid",
    "span_uids",
    "split_dataset",
    "split_sentences",
    "write_corpus_file",
    "write_label_file",
    "write_span_file",
]
