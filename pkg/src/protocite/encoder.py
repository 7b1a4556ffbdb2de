"""Trainable text encoder: signed feature hashing into a tanh projection.

The encoder maps a span to a unit-norm vector: tokens are hashed into H
buckets with a stable signed hash, projected through a dense layer with
tanh, then L2-normalized. Every stage is differentiable, and
``encode_backward`` provides the exact adjoint used in training.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus.cleaning import MASK_TOKEN
from .corpus.types import ContextSpan

_TOKEN = re.compile(r"<mask>|[a-z0-9']+")
_MASK_BUCKET = 0  # reserved for the sentinel token


@dataclass
class Embedding:
    """A d-dimensional vector; ``normalized`` is False only for the
    zero-vector degenerate case, which bypasses normalization."""

    vector: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=np.float64)
        if not np.all(np.isfinite(self.vector)):
            raise ValueError("embedding has non-finite entries")


@dataclass
class EncoderParams:
    hash_dim: int
    embed_dim: int
    weight: np.ndarray  # (embed_dim, hash_dim)
    bias: np.ndarray  # (embed_dim,)
    seed: int = 0

    def __post_init__(self):
        if self.embed_dim < 2:
            raise ValueError(f"embed_dim must be >= 2, got {self.embed_dim}")
        if self.hash_dim < self.embed_dim:
            raise ValueError("hash_dim must be >= embed_dim")
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.shape != (self.embed_dim, self.hash_dim):
            raise ValueError(f"weight shape {self.weight.shape} != (d, H)")
        if self.bias.shape != (self.embed_dim,):
            raise ValueError(f"bias shape {self.bias.shape} != (d,)")
        if not (np.all(np.isfinite(self.weight)) and np.all(np.isfinite(self.bias))):
            raise ValueError("encoder parameters must be finite")

    @classmethod
    def initialize(cls, hash_dim: int = 4096, embed_dim: int = 32, seed: int = 0) -> "EncoderParams":
        rng = np.random.default_rng(seed)
        scale = 1.0 / np.sqrt(hash_dim)
        weight = rng.normal(0.0, scale, size=(embed_dim, hash_dim))
        return cls(hash_dim, embed_dim, weight, np.zeros(embed_dim), seed)

    def copy(self) -> "EncoderParams":
        return EncoderParams(self.hash_dim, self.embed_dim, self.weight.copy(), self.bias.copy(), self.seed)


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def _bucket_and_sign(token: str, hash_dim: int) -> tuple[int, float]:
    if token == MASK_TOKEN:
        return _MASK_BUCKET, 1.0
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    value = int.from_bytes(digest, "little")
    bucket = 1 + value % (hash_dim - 1)
    sign = 1.0 if (value >> 63) & 1 == 0 else -1.0
    return bucket, sign


def hash_features(span: ContextSpan | str, hash_dim: int) -> np.ndarray:
    """Signed token counts hashed into hash_dim buckets.

    Deterministic across runs and processes (keyed on token bytes, not
    Python's randomized hash). The sentinel token lands in a reserved
    bucket so masked citation sites stay distinguishable.
    """
    if hash_dim <= 1:
        raise ValueError(f"hash_dim must be > 1, got {hash_dim}")
    text = span if isinstance(span, str) else span.text
    vec = np.zeros(hash_dim, dtype=np.float64)
    for token in tokenize(text):
        bucket, sign = _bucket_and_sign(token, hash_dim)
        vec[bucket] += sign
    return vec


def hash_features_batch(spans: Sequence[ContextSpan | str], hash_dim: int) -> np.ndarray:
    return np.stack([hash_features(s, hash_dim) for s in spans]) if spans else np.zeros((0, hash_dim))


def encode(span: ContextSpan | str, params: EncoderParams) -> Embedding:
    """tanh(W·hash_features + b), L2-normalized.

    A zero pre-normalization vector (e.g. zero weights on an empty span)
    is returned as-is and flagged unnormalized.
    """
    features = hash_features(span, params.hash_dim)
    embeddings, cache = encode_features(features[None, :], params)
    return Embedding(embeddings[0], normalized=float(cache["norms"][0]) > 0.0)


def encode_features(features: np.ndarray, params: EncoderParams) -> tuple[np.ndarray, dict]:
    """Batch forward pass over precomputed hashed features (B, H).

    Returns the (B, d) embeddings and a cache for ``encode_backward``.
    """
    pre = np.tanh(features @ params.weight.T + params.bias)
    norms = np.linalg.norm(pre, axis=1)
    safe = np.where(norms > 0.0, norms, 1.0)
    out = pre / safe[:, None]
    return out, {"features": features, "pre": pre, "norms": norms, "out": out}


def encode_backward(grad_out: np.ndarray, cache: dict) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of a scalar loss w.r.t. (weight, bias) given d(loss)/d(embeddings).

    Backpropagates through the normalization (identity for zero-norm
    rows) and the tanh.
    """
    pre, norms, out = cache["pre"], cache["norms"], cache["out"]
    safe = np.where(norms > 0.0, norms, 1.0)
    inner = np.einsum("bd,bd->b", grad_out, out)
    grad_pre = (grad_out - inner[:, None] * out) / safe[:, None]
    grad_pre = np.where(norms[:, None] > 0.0, grad_pre, grad_out)
    grad_z = grad_pre * (1.0 - pre**2)
    grad_weight = grad_z.T @ cache["features"]
    grad_bias = grad_z.sum(axis=0)
    return grad_weight, grad_bias
