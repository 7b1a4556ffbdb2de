"""U.S. Code citation extraction.

The pattern family covers the "U.S.C.", "U.S. Code" and "USC" spellings,
optional spacing around the section symbol, and a parenthesized
subsection immediately after the section number.
"""

from __future__ import annotations

import re

from .types import CitationRef

# Section numbers start with digits and may continue with letters or
# hyphens (e.g. 1320a-7b) but never end in punctuation.
_USC_PATTERN = re.compile(
    r"(?P<title>\d+)\s+"
    r"(?:U\.\s?S\.\s?C(?:ode)?\.?|USC)\s*"
    r"§{1,2}\s*"
    r"(?P<section>\d+(?:[A-Za-z0-9\-]*[A-Za-z0-9])?)"
    r"(?:\s?\((?P<sub>[A-Za-z0-9]{1,8})\))?"
)


def extract_citations(text: str) -> list[tuple[CitationRef, int]]:
    """All U.S. Code citations in text order with their character offsets.

    Matches are non-overlapping and left-to-right; an empty list means no
    citations were found.
    """
    found = []
    for m in _USC_PATTERN.finditer(text):
        ref = CitationRef(int(m.group("title")), m.group("section"), m.group("sub"))
        found.append((ref, m.start()))
    return found


def citation_pattern() -> re.Pattern:
    """The compiled pattern, shared with the cleaning stage."""
    return _USC_PATTERN
