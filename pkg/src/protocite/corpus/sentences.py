"""Rule-based sentence segmentation with an abbreviation guard list.

Deterministic and dependency-free: terminal punctuation followed by
whitespace and an uppercase letter, digit or opening quote ends a
sentence, unless the preceding word is a known abbreviation or a single
initial. Joining the output with single spaces preserves every
non-whitespace character of the input.
"""

from __future__ import annotations

import re

# Common legal and general abbreviations that do not end sentences.
_ABBREVIATIONS = {
    "v", "vs", "u.s", "usc", "fed", "no", "nos", "mr", "mrs", "ms", "dr",
    "inc", "corp", "co", "ltd", "llc", "st", "stat", "cir", "ct", "app",
    "dist", "div", "rev", "ann", "sec", "art", "id", "ibid", "cf", "e.g",
    "i.e", "etc", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep",
    "sept", "oct", "nov", "dec", "reg", "supp", "gov", "dep", "dept",
}

_BOUNDARY = re.compile(r"([.?!]+[\"')\]]*)(\s+)(?=[\"'(\[]?[A-Z0-9])")
_TRAILING_WORD = re.compile(r"([A-Za-z][A-Za-z.]*)$")


def split_sentences(text: str) -> list[str]:
    """Split cleaned text into sentences; empty input yields an empty list."""
    if not text.strip():
        return []
    sentences = []
    start = 0
    for m in _BOUNDARY.finditer(text):
        candidate = text[start : m.end(1)]
        if _ends_with_abbreviation(candidate):
            continue
        sentences.append(candidate.strip())
        start = m.end()
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return [s for s in sentences if s]


def _ends_with_abbreviation(segment: str) -> bool:
    body = segment.rstrip(".?!\"')]")
    m = _TRAILING_WORD.search(body)
    if not m:
        return False
    word = m.group(1).rstrip(".")
    if len(word) == 1 and word.isalpha():
        return True  # initials such as "A." or "J."
    return word.lower() in _ABBREVIATIONS
