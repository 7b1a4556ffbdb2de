"""Span extraction, label sets, splits, stats and the file formats."""

from collections import Counter

import numpy as np
import pytest

from protocite.corpus import (
    CitationRef,
    CorpusError,
    Document,
    LabelSet,
    build_label_set,
    corpus_stats,
    extract_citations,
    extract_context_spans,
    read_corpus_file,
    read_label_file,
    read_span_file,
    span_uids,
    split_dataset,
    write_corpus_file,
    write_label_file,
    write_span_file,
)
from conftest import make_doc, make_span

CITE = "42 U.S.C. § 1983"


def _doc_with_citations(doc_id: str, n_sentences: int, cited: list[int]) -> Document:
    sentences = [
        f"This is plain filler sentence number {i}." if i not in cited
        else f"The claim arises under {CITE} in sentence {i}."
        for i in range(1, n_sentences + 1)
    ]
    return make_doc(doc_id, sentences)


@pytest.fixture
def one_label_set() -> LabelSet:
    return LabelSet(labels=[CitationRef(42, "1983")])


def test_window_around_citation_sentence(one_label_set):
    doc = _doc_with_citations("d", 7, cited=[4])
    [span] = extract_context_spans(doc, one_label_set, window=2)
    assert len(span.sentences) == 5
    assert span.sentences[0].endswith("number 2.")
    assert span.sentences[-1].endswith("number 6.")
    assert span.label_vector.tolist() == [1]


def test_window_clipped_at_document_start(one_label_set):
    doc = _doc_with_citations("d", 3, cited=[1])
    [span] = extract_context_spans(doc, one_label_set, window=4)
    assert len(span.sentences) == 3


def test_overlapping_windows_merge(one_label_set):
    doc = _doc_with_citations("d", 7, cited=[3, 5])
    [span] = extract_context_spans(doc, one_label_set, window=2)
    assert len(span.sentences) == 7


def test_disjoint_windows_stay_separate(one_label_set):
    doc = _doc_with_citations("d", 12, cited=[2, 10])
    spans = extract_context_spans(doc, one_label_set, window=1)
    assert len(spans) == 2


def test_merge_matches_interval_oracle(one_label_set):
    rng = np.random.default_rng(4)
    for _ in range(25):
        n = int(rng.integers(4, 25))
        cited = sorted(rng.choice(np.arange(1, n + 1), size=int(rng.integers(1, 4)), replace=False).tolist())
        window = int(rng.integers(0, 4))
        doc = _doc_with_citations("d", n, cited)
        spans = extract_context_spans(doc, one_label_set, window)
        # Independent interval-merge oracle over 0-based sentence indices.
        intervals = []
        for c in cited:
            lo, hi = max(0, c - 1 - window), min(n - 1, c - 1 + window)
            if intervals and lo <= intervals[-1][1]:
                intervals[-1][1] = max(intervals[-1][1], hi)
            else:
                intervals.append([lo, hi])
        assert [len(s.sentences) for s in spans] == [hi - lo + 1 for lo, hi in intervals]


def test_single_citation_span_bounded_by_window(one_label_set):
    for window in range(4):
        for n in range(1, 12):
            doc = _doc_with_citations("d", n, cited=[max(1, n // 2)])
            [span] = extract_context_spans(doc, one_label_set, window)
            assert len(span.sentences) <= 2 * window + 1


def test_no_citation_fallback_samples_15(one_label_set):
    doc = _doc_with_citations("d", 30, cited=[])
    [span] = extract_context_spans(doc, one_label_set, window=2, seed=9)
    assert len(span.sentences) == 15
    assert span.label_vector.sum() == 0
    # Seed-stable and in document order.
    [again] = extract_context_spans(doc, one_label_set, window=2, seed=9)
    assert span.sentences == again.sentences
    positions = [int(s.split()[-1].rstrip(".")) for s in span.sentences]
    assert positions == sorted(positions)


def test_no_citation_short_document_uses_all(one_label_set):
    doc = _doc_with_citations("d", 6, cited=[])
    [span] = extract_context_spans(doc, one_label_set, window=2)
    assert len(span.sentences) == 6


def test_markup_only_document_yields_no_spans(one_label_set):
    doc = Document("d", "<p>   </p>", [])
    assert extract_context_spans(doc, one_label_set, window=2) == []


def test_non_target_citation_triggers_fallback():
    label_set = LabelSet(labels=[CitationRef(99, "9999")])
    doc = _doc_with_citations("d", 20, cited=[5])  # cites 42 §1983, not a target
    [span] = extract_context_spans(doc, label_set, window=2)
    assert len(span.sentences) == 15
    assert span.label_vector.sum() == 0


# -- label sets ---------------------------------------------------------------


def _corpus_counting(keys_per_doc: list[list[str]]) -> list[Document]:
    docs = []
    for i, keys in enumerate(keys_per_doc):
        text = " ".join(CitationRef.from_key(k).citation_string() for k in keys) or "empty filler"
        docs.append(Document(f"doc{i}", text, extract_citations(text)))
    return docs


def test_label_ranking_matches_count_oracle():
    rng = np.random.default_rng(0)
    universe = [f"{t} §{s}" for t in (5, 11, 42) for s in (100, 200, 300)]
    keys_per_doc = [
        list(rng.choice(universe, size=int(rng.integers(1, 5)), replace=False))
        for _ in range(40)
    ]
    docs = _corpus_counting(keys_per_doc)
    ls = build_label_set(docs, top_k=5)
    counts = Counter()
    for keys in keys_per_doc:
        for key in set(keys):
            counts[key] += 1
    expected = sorted(counts, key=lambda k: (-counts[k], k))[:5]
    assert ls.keys() == expected


def test_document_counted_once_per_key():
    docs = _corpus_counting([["42 §1983", "42 §1983", "42 §1983"], ["11 §523"], ["11 §523"]])
    ls = build_label_set(docs, top_k=2)
    assert ls.keys() == ["11 §523", "42 §1983"]  # 2 docs beat 1 doc


def test_top_100_minus_55_exclusions_leaves_45():
    universe = [f"{t} §{s}" for t in range(1, 11) for s in range(100, 111)]  # 110 keys
    # Key i appears in (120 - i) documents: strictly decreasing frequency.
    keys_per_doc = []
    for i, key in enumerate(universe):
        keys_per_doc += [[key]] * (120 - i)
    docs = _corpus_counting(keys_per_doc)
    top100 = build_label_set(docs, top_k=100)
    assert top100.n == 100
    exclude = top100.labels[:55]
    filtered = build_label_set(docs, top_k=100, exclude=exclude)
    assert filtered.n == 45
    assert not set(r.key for r in exclude) & set(filtered.keys())


def test_exclude_everything_fails():
    docs = _corpus_counting([["42 §1983"]])
    with pytest.raises(CorpusError):
        build_label_set(docs, top_k=1, exclude=[CitationRef(42, "1983")])


def test_label_set_rejects_duplicates():
    with pytest.raises(CorpusError):
        LabelSet(labels=[CitationRef(1, "1"), CitationRef(1, "1")])


# -- splits -------------------------------------------------------------------


def _spans_for_docs(n_docs: int, spans_per_doc: int = 2):
    return [
        make_span(f"doc{i:03d}", 1, [0])
        for i in range(n_docs)
        for _ in range(spans_per_doc)
    ]


def test_split_exact_80_5_15():
    spans = _spans_for_docs(100)
    train, val, test = split_dataset(spans, (0.8, 0.05, 0.15), seed=1)
    sizes = tuple(len({s.doc_id for s in part}) for part in (train, val, test))
    assert sizes == (80, 5, 15)


def test_split_single_document_fails():
    with pytest.raises(CorpusError):
        split_dataset(_spans_for_docs(1), (0.8, 0.05, 0.15), seed=0)


def test_split_deterministic_and_document_level():
    spans = _spans_for_docs(40)
    first = split_dataset(spans, (0.6, 0.2, 0.2), seed=7)
    second = split_dataset(spans, (0.6, 0.2, 0.2), seed=7)
    for a, b in zip(first, second):
        assert [s.doc_id for s in a] == [s.doc_id for s in b]
    memberships = {}
    for part_index, part in enumerate(first):
        for span in part:
            assert memberships.setdefault(span.doc_id, part_index) == part_index


def test_split_membership_ignores_span_order_and_multiplicity():
    spans = _spans_for_docs(30)
    base = split_dataset(spans, (0.5, 0.25, 0.25), seed=3)
    shuffled = list(reversed(spans)) + spans[:5]  # reordered plus duplicates
    again = split_dataset(shuffled, (0.5, 0.25, 0.25), seed=3)
    for a, b in zip(base, again):
        assert {s.doc_id for s in a} == {s.doc_id for s in b}


def test_split_ratios_must_sum_to_one():
    with pytest.raises(CorpusError):
        split_dataset(_spans_for_docs(10), (0.5, 0.2, 0.2), seed=0)


# -- stats ----------------------------------------------------------------------


def test_stats_match_brute_force_tally(three_label_set):
    texts = {
        "a": "42 U.S.C. § 1983 and 42 U.S.C. § 1983 again plus 28 U.S.C. § 1331",
        "b": "11 U.S.C. § 523(a) alone",
        "c": "42 U.S.C. § 1983 with 11 U.S.C. § 523(a)",
    }
    docs = [Document(k, v, extract_citations(v)) for k, v in texts.items()]
    report = corpus_stats(docs, three_label_set)
    assert dict(report.label_doc_counts) == {"42 §1983": 2, "11 §523(a)": 2, "28 §1331": 1}
    assert dict(report.doc_citation_counts) == {"a": 3, "b": 1, "c": 2}
    assert report.mean_citations_per_doc == pytest.approx(2.0)
    assert "42 §1983" in report.to_tsv()


def test_stats_empty_corpus(three_label_set):
    report = corpus_stats([], three_label_set)
    assert report.label_doc_counts == [] and report.doc_citation_counts == []


def test_label_count_sum_covers_retained_documents(three_label_set):
    # Multi-label counting: per-label document tallies sum to at least the
    # number of documents holding any target citation.
    rng = np.random.default_rng(6)
    refs = three_label_set.labels
    docs = []
    for i in range(30):
        picks = rng.choice(3, size=int(rng.integers(0, 4)), replace=False)
        text = " ".join(refs[j].citation_string() for j in picks) or "nothing cited"
        docs.append(Document(f"d{i}", text, extract_citations(text)))
    report = corpus_stats(docs, three_label_set)
    retained = sum(1 for d in docs if d.citation_keys() & set(three_label_set.keys()))
    assert sum(c for _, c in report.label_doc_counts) >= retained


# -- file formats ---------------------------------------------------------------


def test_corpus_file_round_trip(tmp_path):
    text = f"Some text citing {CITE} here."
    docs = [Document("x", text, extract_citations(text)), Document("y", "No citations.", [])]
    path = tmp_path / "corpus.jsonl"
    write_corpus_file(docs, path)
    back = read_corpus_file(path)
    assert [(d.id, d.text, d.citations) for d in back] == [(d.id, d.text, d.citations) for d in docs]


def test_corpus_file_rejects_duplicate_ids(tmp_path):
    path = tmp_path / "corpus.jsonl"
    path.write_text('{"id": "a", "text": "x"}\n{"id": "a", "text": "y"}\n')
    with pytest.raises(CorpusError):
        read_corpus_file(path)


def test_span_file_round_trip(tmp_path):
    spans = [make_span("d1", 3, [0, 2]), make_span("d1", 3, []), make_span("d2", 3, [1])]
    path = tmp_path / "spans.jsonl"
    write_span_file(spans, path)
    back = read_span_file(path, 3)
    assert [(s.doc_id, s.sentences, s.label_vector.tolist()) for s in back] == [
        (s.doc_id, s.sentences, s.label_vector.tolist()) for s in spans
    ]
    assert span_uids(back) == ["d1#0", "d1#1", "d2#0"]


def test_span_file_rejects_bad_label_index(tmp_path):
    path = tmp_path / "spans.jsonl"
    path.write_text('{"doc_id": "d", "sentences": ["s."], "labels": [7]}\n')
    with pytest.raises(CorpusError):
        read_span_file(path, 3)


def test_label_file_round_trip(tmp_path, three_label_set):
    prov_dir = tmp_path / "prov"
    prov_dir.mkdir()
    paths = {}
    for key in three_label_set.keys():
        p = prov_dir / f"{key.replace(' ', '_').replace('§', 'S')}.txt"
        p.write_text(three_label_set.provision_texts[key])
        paths[key] = str(p)
    label_path = tmp_path / "labels.tsv"
    three_label_set.procedural["42 §1983"] = True
    write_label_file(three_label_set, label_path, paths)
    back = read_label_file(label_path)
    assert back.keys() == three_label_set.keys()
    assert back.procedural["42 §1983"] is True
    assert back.provision_texts == three_label_set.provision_texts
