"""Input perturbations: keyword masking and random token masking.

Both perturbations rewrite token content only; the sentence structure
of every span is preserved.
"""

from __future__ import annotations

import re
from typing import Sequence

import numpy as np

from .corpus.cleaning import MASK_TOKEN
from .corpus.types import ContextSpan


def keyword_mask(
    spans: Sequence[ContextSpan],
    keywords: Sequence[str],
    mask_token: str = MASK_TOKEN,
) -> list[ContextSpan]:
    """Replace every case-insensitive keyword occurrence with one mask token.

    Multi-word keywords match across single spaces and are replaced as a
    unit; longer ngrams win over their sub-ngrams. Idempotent as long as
    the mask token is not itself a keyword.
    """
    if not keywords:
        raise ValueError("keyword masking needs a non-empty keyword list")
    ordered = sorted(set(keywords), key=lambda k: (-len(k.split()), -len(k), k))
    alternatives = [re.escape(k).replace(r"\ ", r"\s+") for k in ordered]
    pattern = re.compile(r"(?<![\w'])(?:" + "|".join(alternatives) + r")(?![\w'])", re.IGNORECASE)
    masked = []
    for span in spans:
        sentences = [pattern.sub(mask_token, s) for s in span.sentences]
        masked.append(ContextSpan(span.doc_id, sentences, span.label_vector.copy()))
    return masked


def random_mask(
    spans: Sequence[ContextSpan],
    rate: float = 0.15,
    seed: int = 0,
    mask_token: str = MASK_TOKEN,
) -> list[ContextSpan]:
    """Mask floor(rate * tokens) uniformly chosen token positions per span.

    Tokens are whitespace-delimited. The choice is seeded per span
    index, so output is independent of processing order.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"rate must lie in [0, 1], got {rate}")
    masked = []
    for span_index, span in enumerate(spans):
        tokens_per_sentence = [s.split() for s in span.sentences]
        flat: list[tuple[int, int]] = [
            (i, j) for i, row in enumerate(tokens_per_sentence) for j in range(len(row))
        ]
        n_mask = int(np.floor(rate * len(flat)))
        if n_mask > 0:
            rng = np.random.default_rng([seed, span_index])
            for pick in rng.choice(len(flat), size=n_mask, replace=False):
                i, j = flat[pick]
                tokens_per_sentence[i][j] = mask_token
        sentences = [" ".join(row) if row else s for row, s in zip(tokens_per_sentence, span.sentences)]
        masked.append(ContextSpan(span.doc_id, sentences, span.label_vector.copy()))
    return masked
