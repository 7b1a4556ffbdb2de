"""Text cleaning: markup, links, citation strings and non-ASCII removal.

Cleaning runs after citation extraction so that removing the citation
strings cannot destroy labels. Under the "sentinel" policy each removed
target citation is replaced by a single mask token so spans keep the
positional context of the citation site without leaking the label.
"""

from __future__ import annotations

import re

from .citations import citation_pattern
from .types import CitationRef

MASK_TOKEN = "<mask>"

# HTML tags and comments, excluding the mask sentinels this module inserts.
_HTML_COMMENT = re.compile(r"<!--.*?-->", re.DOTALL)
_HTML_TAG = re.compile(r"<(?!mask(?::\d+)?>)[^<>]*>")
_URL = re.compile(r"(?:https?://|www\.)\S+")
# Supreme Court reporter citations: "530 U.S. 914", "117 S. Ct. 2365",
# "49 L. Ed. 2d 974", with an optional pin cite.
_REPORTER = re.compile(
    r"\d+\s+(?:U\.\s?S\.|S\.\s?Ct\.|L\.\s?Ed\.(?:\s?2d)?)\s+\d+(?:,\s*\d+)?"
)
_NON_ASCII = re.compile(r"[^\x00-\x7F]")
_WHITESPACE = re.compile(r"\s+")
_TRACKED_MASK = re.compile(r"<mask:(\d+)>")


def clean_text(
    text: str,
    masking: str = "sentinel",
    targets: set[str] | None = None,
) -> str:
    """Strip markup, links, citations and non-ASCII from raw text.

    masking "sentinel" replaces each removed target citation with
    MASK_TOKEN; masking "drop" removes it outright. ``targets`` is a set
    of canonical citation keys; when None, every U.S. Code citation
    counts as a target. Non-target citations are always dropped.
    Idempotent: cleaning cleaned text is a no-op.
    """
    if masking not in ("sentinel", "drop"):
        raise ValueError(f"unknown masking policy: {masking!r}")

    def replacement(m: re.Match) -> str:
        if masking == "drop":
            return " "
        ref = CitationRef(int(m.group("title")), m.group("section"), m.group("sub"))
        if targets is None or ref.key in targets:
            return f" {MASK_TOKEN} "
        return " "

    return _clean(text, replacement)


def clean_text_tracked(text: str, citations: list[tuple[CitationRef, int]], targets: set[str]) -> str:
    """Sentinel cleaning that tags target citations with their index.

    Target citation k (index into ``citations``) becomes ``<mask:k>`` so
    span extraction can recover which label sits in which sentence. Use
    :func:`strip_tracking` on the final sentences.
    """
    by_offset = {off: i for i, (_, off) in enumerate(citations)}

    def replacement(m: re.Match) -> str:
        ref = CitationRef(int(m.group("title")), m.group("section"), m.group("sub"))
        idx = by_offset.get(m.start())
        if idx is not None and ref.key in targets:
            return f" <mask:{idx}> "
        return f" {MASK_TOKEN} " if ref.key in targets else " "

    return _clean(text, replacement)


def tracked_indices(sentence: str) -> list[int]:
    """Citation indices tagged in a tracked-cleaned sentence."""
    return [int(m) for m in _TRACKED_MASK.findall(sentence)]


def strip_tracking(sentence: str) -> str:
    """Collapse indexed sentinels back to the plain mask token."""
    return _TRACKED_MASK.sub(MASK_TOKEN, sentence)


def _clean(text: str, citation_replacement) -> str:
    # Citations first: match offsets in raw text line up with the
    # offsets recorded at extraction time (needed by the tracked variant).
    out = citation_pattern().sub(citation_replacement, text)
    out = _HTML_COMMENT.sub(" ", out)
    out = _HTML_TAG.sub(" ", out)
    out = _URL.sub(" ", out)
    out = _REPORTER.sub(" ", out)
    out = _NON_ASCII.sub("", out)
    out = _WHITESPACE.sub(" ", out)
    return out.strip()
