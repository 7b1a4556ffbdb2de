"""Unsupervised statistical keyword extraction from provision text.

A simplified single-document scorer in the YAKE tradition: candidates
are stopword-filtered unigrams and bigrams ranked by term frequency,
position of first occurrence and casing. Deterministic, with
lexicographic tie-breaking.
"""

from __future__ import annotations

import re
from collections import defaultdict

from .corpus.sentences import split_sentences

_WORD = re.compile(r"[A-Za-z][A-Za-z'’’]*")

STOPWORDS = frozenset(
    """a an and are as at be been but by for from had has have he her his
    i if in into is it its may nor not of on or our shall she such that
    the their them then there these they this to under upon was we were
    when which who whom will with would any all can did do does each
    than so no other more most some only also between before after
    during through over against per within without among both same""".split()
)


def extract_keywords(text: str, count: int = 20, max_ngram: int = 2) -> list[str]:
    """Top-`count` keyword ngrams of a provision text, best first.

    Short texts simply return fewer candidates; the ranking is a pure
    function of the text.
    """
    if not text.strip():
        raise ValueError("keyword extraction needs non-empty text")
    if max_ngram < 1:
        raise ValueError("max_ngram must be >= 1")

    sentences = split_sentences(text) or [text]
    token_rows = [_WORD.findall(s) for s in sentences]
    total_tokens = max(1, sum(len(row) for row in token_rows))

    freq: dict[str, int] = defaultdict(int)
    first_pos: dict[str, int] = {}
    cased: dict[str, int] = defaultdict(int)
    position = 0
    for row in token_rows:
        lowered = [t.lower() for t in row]
        for i, token in enumerate(row):
            for n in range(1, max_ngram + 1):
                if i + n > len(row):
                    break
                words = lowered[i : i + n]
                if any(w in STOPWORDS or len(w) < 2 for w in words):
                    continue
                gram = " ".join(words)
                freq[gram] += 1
                first_pos.setdefault(gram, position + i)
                if any(t[0].isupper() for t in row[i : i + n]):
                    cased[gram] += 1
        position += len(row)

    def score(gram: str) -> float:
        tf = freq[gram]
        case_ratio = cased[gram] / tf
        recency = 1.0 / (1.0 + first_pos[gram] / total_tokens)
        length_boost = 1.0 + 0.25 * (gram.count(" "))
        return tf * (1.0 + 0.5 * case_ratio) * recency * length_boost

    ranked = sorted(freq, key=lambda g: (-score(g), g))
    return ranked[:count]


def pooled_keywords(provision_texts: dict[str, str], count: int = 20, max_ngram: int = 2) -> list[str]:
    """Union of per-provision top keywords, deduplicated, label order first."""
    seen: set[str] = set()
    pooled: list[str] = []
    for key in provision_texts:
        text = provision_texts[key]
        if not text.strip():
            continue
        for gram in extract_keywords(text, count=count, max_ngram=max_ngram):
            if gram not in seen:
                seen.add(gram)
                pooled.append(gram)
    return pooled
