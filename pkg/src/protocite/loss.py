"""Composite training objective over prototype similarities.

The classifier head consumes distance-based similarity scores to every
prototype. The objective is mean multi-label binary cross-entropy plus
a precedent term (pull to own-class prototypes, push from other-class
prototypes, separate same-class prototypes above a cosine ceiling) and
a provision term (pull to the provision prototypes of the positive
labels). ``loss_backward`` implements the exact adjoint of the whole
computation; a finite-difference checker lives in ``gradcheck``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .prototypes import KIND_PRECEDENT, KIND_PROVISION, Prototype

HEAD_FEATURES_ALL = "all"
HEAD_FEATURES_PRECEDENT = "precedent"


class NonFiniteLossError(ArithmeticError):
    """A loss term went non-finite; carries the offending term name."""

    def __init__(self, term: str):
        self.term = term
        super().__init__(f"non-finite value in loss term {term!r}")


@dataclass
class LossWeights:
    """Coefficients of the composite objective.

    lambda1 pulls embeddings toward own-class precedent prototypes,
    lambda2 pushes them from other-class ones, lambda3 separates
    same-class prototype pairs whose cosine exceeds s_max. delta weighs
    the provision term; epsilon regularizes the similarity score; s_min
    is the snapping threshold used at discovery time.
    """

    lambda1: float = 0.10
    lambda2: float = 0.0005
    lambda3: float = 0.001
    delta: float = 0.10
    epsilon: float = 1e-4
    s_max: float = 0.3
    s_min: float = -1.0

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        for name in ("lambda1", "lambda2", "lambda3", "delta"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("s_max", "s_min"):
            if not -1.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [-1, 1]")


@dataclass
class ClassifierHead:
    """Linear head over similarity features (or raw embeddings)."""

    weight: np.ndarray  # (n_labels, n_features)
    bias: np.ndarray  # (n_labels,)

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ValueError("head weight must be (n, F) with matching bias")
        if not (np.all(np.isfinite(self.weight)) and np.all(np.isfinite(self.bias))):
            raise ValueError("head parameters must be finite")

    @classmethod
    def zeros(cls, n_labels: int, n_features: int) -> "ClassifierHead":
        return cls(np.zeros((n_labels, n_features)), np.zeros(n_labels))

    def copy(self) -> "ClassifierHead":
        return ClassifierHead(self.weight.copy(), self.bias.copy())


@dataclass
class PrototypeBank:
    """Prototype vectors split by kind, in head-column (dump) order."""

    precedent: np.ndarray  # (Mp, d)
    precedent_labels: np.ndarray  # (Mp,)
    provision: np.ndarray  # (Pv, d)
    provision_labels: np.ndarray  # (Pv,)

    @classmethod
    def from_prototypes(cls, prototypes: Sequence[Prototype], dim: int) -> "PrototypeBank":
        prec = [p for p in prototypes if p.kind == KIND_PRECEDENT]
        prov = [p for p in prototypes if p.kind == KIND_PROVISION]
        return cls(
            np.stack([p.vector for p in prec]) if prec else np.zeros((0, dim)),
            np.array([p.label_index for p in prec], dtype=np.int64),
            np.stack([p.vector for p in prov]) if prov else np.zeros((0, dim)),
            np.array([p.label_index for p in prov], dtype=np.int64),
        )

    @property
    def n_features_all(self) -> int:
        return len(self.precedent) + len(self.provision)


def as_bank(prototypes, dim: int) -> PrototypeBank:
    """Coerce a prototype sequence (or pass through a bank)."""
    if isinstance(prototypes, PrototypeBank):
        return prototypes
    return PrototypeBank.from_prototypes(prototypes, dim)


def similarity_score(p: np.ndarray, h: np.ndarray, epsilon: float) -> float:
    """2*log((d2 + 1) / (d2 + epsilon)) for d2 the squared L2 distance.

    Non-negative for epsilon < 1, strictly decreasing in d2, maximal at
    d2 = 0 where it equals 2*log(1/epsilon).
    """
    p = np.asarray(p, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if p.shape != h.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {h.shape}")
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    scores, _, _ = kernels.similarity_forward(h[None, :], p[None, :], epsilon)
    return float(scores[0, 0])


def d_preced(
    embeddings: np.ndarray,
    labels: np.ndarray,
    bank: PrototypeBank,
    weights: LossWeights,
) -> tuple[float, dict]:
    """The precedent loss term (already carrying its lambda weights)."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    cache = _preced_forward(embeddings, np.asarray(labels), as_bank(bank, embeddings.shape[1]), weights)
    return cache["value"], {"skipped_own": cache["skipped_own"]}


def d_provis(embeddings: np.ndarray, labels: np.ndarray, bank: PrototypeBank) -> tuple[float, dict]:
    """Mean min squared distance to the provision prototypes of the
    positive labels (unweighted; the composite applies delta)."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    cache = _provis_forward(embeddings, np.asarray(labels), as_bank(bank, embeddings.shape[1]))
    return cache["value"], {"skipped_unlabeled": cache["skipped"]}


def total_loss(
    embeddings: np.ndarray,
    labels: np.ndarray,
    bank: PrototypeBank,
    head: ClassifierHead,
    weights: LossWeights,
    head_features: str = HEAD_FEATURES_ALL,
) -> tuple[float, dict]:
    """Composite objective value and its per-term breakdown.

    The breakdown reports bce, d_preced (lambda-weighted), d_provis
    (unweighted) and total = bce + d_preced + delta * d_provis.
    """
    _, breakdown, _ = loss_forward(embeddings, labels, bank, head, weights, head_features)
    return breakdown["total"], breakdown


def loss_forward(
    embeddings: np.ndarray,
    labels: np.ndarray,
    bank: PrototypeBank,
    head: ClassifierHead,
    weights: LossWeights,
    head_features: str = HEAD_FEATURES_ALL,
) -> tuple[float, dict, dict]:
    """Forward pass; returns (total, breakdown, cache for loss_backward)."""
    E = np.asarray(embeddings, dtype=np.float64)
    Y = np.asarray(labels)
    if E.ndim != 2 or len(E) == 0:
        raise ValueError("batch must be a non-empty (B, d) array")
    if Y.shape[0] != E.shape[0]:
        raise ValueError("labels must align with the batch")
    if head_features not in (HEAD_FEATURES_ALL, HEAD_FEATURES_PRECEDENT):
        raise ValueError(f"unknown head_features: {head_features!r}")
    bank = as_bank(bank, E.shape[1])

    use_provision_features = head_features == HEAD_FEATURES_ALL and len(bank.provision) > 0
    s_prec, d2_prec, ds_prec = kernels.similarity_forward(E, bank.precedent, weights.epsilon)
    if use_provision_features:
        s_prov, d2_prov, ds_prov = kernels.similarity_forward(E, bank.provision, weights.epsilon)
        features = np.concatenate([s_prec, s_prov], axis=1)
    else:
        s_prov = d2_prov = ds_prov = None
        features = s_prec
    expected = len(bank.precedent) + (len(bank.provision) if use_provision_features else 0)
    if head.weight.shape[1] != expected:
        raise ValueError(
            f"head expects {head.weight.shape[1]} features, similarity vector has {expected}"
        )

    bce, bce_cache = _bce_forward(features, Y, head)
    preced_cache = _preced_forward(E, Y, bank, weights, d2_prec)
    provis_cache = _provis_forward(E, Y, bank)

    total = bce + preced_cache["value"] + weights.delta * provis_cache["value"]
    breakdown = {
        "bce": bce,
        "d_preced": preced_cache["value"],
        "d_provis": provis_cache["value"],
        "total": total,
    }
    for term in ("bce", "d_preced", "d_provis", "total"):
        if not np.isfinite(breakdown[term]):
            raise NonFiniteLossError(term)
    cache = {
        "E": E,
        "Y": Y,
        "bank": bank,
        "weights": weights,
        "head": head,
        "use_provision_features": use_provision_features,
        "ds_prec": ds_prec,
        "ds_prov": ds_prov,
        "bce": bce_cache,
        "preced": preced_cache,
        "provis": provis_cache,
    }
    return total, breakdown, cache


def loss_backward(cache: dict) -> dict:
    """Gradients of the composite objective.

    Returns d_embeddings (B, d), d_head_weight, d_head_bias and
    d_precedent (Mp, d). Provision prototype vectors receive no
    gradient: they are re-encoded from text at re-clustering events.
    """
    E, Y = cache["E"], cache["Y"]
    bank: PrototypeBank = cache["bank"]
    w: LossWeights = cache["weights"]
    batch = len(E)

    d_features, d_head_w, d_head_b = _bce_backward(cache["bce"])
    mp = len(bank.precedent)
    d_s_prec = d_features[:, :mp]
    dd2_prec = d_s_prec * cache["ds_prec"]

    dE = 2.0 * (dd2_prec.sum(axis=1)[:, None] * E - dd2_prec @ bank.precedent)
    dP = 2.0 * (dd2_prec.sum(axis=0)[:, None] * bank.precedent - dd2_prec.T @ E)

    if cache["use_provision_features"]:
        dd2_prov = d_features[:, mp:] * cache["ds_prov"]
        dE += 2.0 * (dd2_prov.sum(axis=1)[:, None] * E - dd2_prov @ bank.provision)

    pc = cache["preced"]
    for i, j in pc["own_argmin"]:
        delta = (2.0 * w.lambda1 / batch) * (E[i] - bank.precedent[j])
        dE[i] += delta
        dP[j] -= delta
    for i, j in pc["other_argmin"]:
        delta = (2.0 * w.lambda2 / batch) * (E[i] - bank.precedent[j])
        dE[i] -= delta
        dP[j] += delta
    for a, b in pc["active_pairs"]:
        pa, pb = bank.precedent[a], bank.precedent[b]
        na, nb = np.linalg.norm(pa), np.linalg.norm(pb)
        cos = float(pa @ pb) / (na * nb)
        dP[a] += w.lambda3 * (pb / (na * nb) - cos * pa / na**2)
        dP[b] += w.lambda3 * (pa / (na * nb) - cos * pb / nb**2)

    for i, j in cache["provis"]["argmin"]:
        dE[i] += (2.0 * w.delta / batch) * (E[i] - bank.provision[j])

    return {
        "d_embeddings": dE,
        "d_head_weight": d_head_w,
        "d_head_bias": d_head_b,
        "d_precedent": dP,
    }


def bce_on_features(features: np.ndarray, labels: np.ndarray, head: ClassifierHead):
    """Plain BCE of a linear head on arbitrary features (vanilla mode).

    Returns (value, d_features, d_head_weight, d_head_bias).
    """
    value, cache = _bce_forward(np.asarray(features, float), np.asarray(labels), head)
    if not np.isfinite(value):
        raise NonFiniteLossError("bce")
    d_features, d_w, d_b = _bce_backward(cache)
    return value, d_features, d_w, d_b


def head_scores(features: np.ndarray, head: ClassifierHead) -> np.ndarray:
    """Per-label sigmoid scores for a feature batch."""
    logits = features @ head.weight.T + head.bias
    return _sigmoid(logits)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _bce_forward(features: np.ndarray, Y: np.ndarray, head: ClassifierHead) -> tuple[float, dict]:
    logits = features @ head.weight.T + head.bias
    y = Y.astype(np.float64)
    # Stable elementwise BCE-with-logits.
    elem = np.maximum(logits, 0.0) - logits * y + np.log1p(np.exp(-np.abs(logits)))
    value = float(elem.mean())
    return value, {"features": features, "logits": logits, "y": y, "head": head}


def _bce_backward(cache: dict) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    logits, y, head = cache["logits"], cache["y"], cache["head"]
    d_logits = (_sigmoid(logits) - y) / logits.size
    d_weight = d_logits.T @ cache["features"]
    d_bias = d_logits.sum(axis=0)
    d_features = d_logits @ head.weight
    return d_features, d_weight, d_bias


def _preced_forward(
    E: np.ndarray,
    Y: np.ndarray,
    bank: PrototypeBank,
    w: LossWeights,
    d2: np.ndarray | None = None,
) -> dict:
    batch = len(E)
    if len(bank.precedent) == 0:
        return {
            "value": 0.0, "own_argmin": [], "other_argmin": [],
            "active_pairs": [], "skipped_own": list(range(batch)),
        }
    if d2 is None:
        d2 = kernels.pairwise_sqdist(E, bank.precedent)
    own = Y[:, bank.precedent_labels].astype(bool)

    own_sum = 0.0
    other_sum = 0.0
    own_argmin: list[tuple[int, int]] = []
    other_argmin: list[tuple[int, int]] = []
    skipped_own: list[int] = []
    for i in range(batch):
        own_idx = np.nonzero(own[i])[0]
        if len(own_idx):
            j = int(own_idx[np.argmin(d2[i, own_idx])])
            own_sum += d2[i, j]
            own_argmin.append((i, j))
        else:
            # No prototype carries any of this sample's positive labels;
            # the sample drops out of the pull term (denominator kept).
            skipped_own.append(i)
        other_idx = np.nonzero(~own[i])[0]
        if len(other_idx):
            j = int(other_idx[np.argmin(d2[i, other_idx])])
            other_sum += d2[i, j]
            other_argmin.append((i, j))

    hinge_sum, active_pairs = _separation_hinge(bank, w.s_max)
    value = (
        w.lambda1 * own_sum / batch
        - w.lambda2 * other_sum / batch
        + w.lambda3 * hinge_sum
    )
    return {
        "value": float(value),
        "own_argmin": own_argmin,
        "other_argmin": other_argmin,
        "active_pairs": active_pairs,
        "skipped_own": skipped_own,
    }


def _separation_hinge(bank: PrototypeBank, s_max: float) -> tuple[float, list[tuple[int, int]]]:
    """Sum of max(0, cos - s_max) over ordered same-class prototype pairs."""
    total = 0.0
    active: list[tuple[int, int]] = []
    for label in np.unique(bank.precedent_labels):
        slots = np.nonzero(bank.precedent_labels == label)[0]
        if len(slots) < 2:
            continue
        block = bank.precedent[slots]
        norms = np.linalg.norm(block, axis=1)
        for ai, a in enumerate(slots):
            for bi, b in enumerate(slots):
                if a == b or norms[ai] == 0.0 or norms[bi] == 0.0:
                    continue
                cos = float(block[ai] @ block[bi]) / (norms[ai] * norms[bi])
                if cos > s_max:
                    total += cos - s_max
                    active.append((int(a), int(b)))
    return total, active


def _provis_forward(E: np.ndarray, Y: np.ndarray, bank: PrototypeBank) -> dict:
    batch = len(E)
    if len(bank.provision) == 0:
        return {"value": 0.0, "argmin": [], "skipped": []}
    d2 = kernels.pairwise_sqdist(E, bank.provision)
    positive = Y[:, bank.provision_labels].astype(bool)
    total = 0.0
    argmin: list[tuple[int, int]] = []
    skipped: list[int] = []
    for i in range(batch):
        idx = np.nonzero(positive[i])[0]
        if len(idx) == 0:
            skipped.append(i)  # unlabeled sample contributes zero
            continue
        j = int(idx[np.argmin(d2[i, idx])])
        total += d2[i, j]
        argmin.append((i, j))
    return {"value": float(total / batch), "argmin": argmin, "skipped": skipped}
