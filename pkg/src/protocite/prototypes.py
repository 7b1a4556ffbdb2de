"""Prototype discovery: per-label cosine k-means plus sample snapping.

For each label, the positive training embeddings are clustered under
cosine distance; each centroid is snapped to its most-similar training
sample when that similarity clears ``s_min``, otherwise the centroid
itself becomes the prototype. Provision prototypes are the encoder's
output on each label's provision source text.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .encoder import EncoderParams, encode
from .corpus.types import LabelSet

KIND_PRECEDENT = "precedent"
KIND_PROVISION = "provision"
CENTROID_SOURCE = "centroid"


class ProvisionTextMissing(ValueError):
    """Raised when provision prototypes are requested for labels without text."""

    def __init__(self, keys: list[str]):
        self.keys = keys
        super().__init__(f"labels missing provision text: {', '.join(keys)}")


@dataclass
class Prototype:
    label_index: int
    kind: str  # KIND_PRECEDENT or KIND_PROVISION
    vector: np.ndarray
    source: str  # sample id, CENTROID_SOURCE, or provision key

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=np.float64)
        if not np.all(np.isfinite(self.vector)):
            raise ValueError(f"prototype for label {self.label_index} has non-finite vector")


def cluster_cosine_kmeans(
    points: np.ndarray,
    k: int,
    seed: int | np.random.SeedSequence = 0,
    max_iter: int = 100,
) -> np.ndarray:
    """Lloyd iterations under cosine distance; centroids are renormalized means.

    Seeded k-means++-style initialization makes runs reproducible; the
    loop stops at an assignment fixpoint or after max_iter rounds. With
    fewer points than k, every point becomes its own singleton centroid.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or len(points) == 0:
        raise ValueError("points must be a non-empty (N, d) array")
    if len(points) <= k:
        return np.stack([_renormalize(p) for p in points])

    rng = np.random.default_rng(seed)
    centroids = points[_plusplus_init(points, k, rng)].copy()
    assignment = np.full(len(points), -1, dtype=np.int64)
    for _ in range(max_iter):
        new_assignment = kernels.cosine_assign(points, centroids)
        if np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        for j in range(k):
            members = points[assignment == j]
            if len(members) == 0:
                continue  # empty cluster keeps its previous centroid
            mean = members.mean(axis=0)
            if np.linalg.norm(mean) > 0.0:
                centroids[j] = mean / np.linalg.norm(mean)
    return centroids


def _plusplus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> list[int]:
    chosen = [int(rng.integers(len(points)))]
    for _ in range(k - 1):
        dist = 1.0 - _cosine_to(points, points[chosen]).max(axis=1)
        weights = np.maximum(dist, 0.0) ** 2
        total = weights.sum()
        if total <= 0.0:
            remaining = [i for i in range(len(points)) if i not in chosen]
            chosen.append(remaining[0] if remaining else chosen[-1])
            continue
        chosen.append(int(rng.choice(len(points), p=weights / total)))
    return chosen


def _cosine_to(points: np.ndarray, refs: np.ndarray) -> np.ndarray:
    pn = np.linalg.norm(points, axis=1)
    rn = np.linalg.norm(refs, axis=1)
    denom = np.outer(pn, rn)
    sims = points @ refs.T
    return np.divide(sims, denom, out=np.zeros_like(sims), where=denom > 0.0)


def _renormalize(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v)
    return v / norm if norm > 0.0 else v.copy()


def discover_prototypes(
    embeddings: np.ndarray,
    labels: np.ndarray,
    sample_ids: Sequence[str],
    k: int = 5,
    s_min: float = -1.0,
    seed: int = 0,
) -> tuple[list[Prototype], list[int]]:
    """Precedent prototypes for every label, in (label, slot) order.

    Returns (prototypes, labels_without_positives). A label with no
    positive sample yields no prototypes and is reported, not fatal.
    Snapping keeps the training-sample embedding (source = sample id)
    when its cosine to the centroid exceeds s_min; otherwise the
    centroid itself is kept (source = "centroid"). Cosines are compared
    at 1e-12 resolution so structural ties (every member of a two-point
    cluster is equidistant from its centroid) resolve to the lowest
    sample index regardless of float rounding.
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels)
    if len(embeddings) != len(labels) or len(embeddings) != len(sample_ids):
        raise ValueError("embeddings, labels and sample_ids must align")
    prototypes: list[Prototype] = []
    empty: list[int] = []
    for label in range(labels.shape[1]):
        positives = np.nonzero(labels[:, label])[0]
        if len(positives) == 0:
            empty.append(label)
            continue
        pts = embeddings[positives]
        centroids = cluster_cosine_kmeans(pts, k, seed=np.random.SeedSequence([seed, label]))
        sims = np.round(_cosine_to(pts, centroids), 12)
        for slot in range(len(centroids)):
            best = int(np.argmax(sims[:, slot]))
            if sims[best, slot] > s_min:
                sample = int(positives[best])
                prototypes.append(
                    Prototype(label, KIND_PRECEDENT, embeddings[sample].copy(), str(sample_ids[sample]))
                )
            else:
                prototypes.append(Prototype(label, KIND_PRECEDENT, centroids[slot], CENTROID_SOURCE))
    return prototypes, empty


def encode_provision_prototypes(label_set: LabelSet, params: EncoderParams) -> list[Prototype]:
    """One provision prototype per label: the encoder output on the
    provision source text. Must be re-run whenever encoder parameters
    change at a re-clustering event."""
    missing = label_set.missing_provisions()
    if missing:
        raise ProvisionTextMissing(missing)
    protos = []
    for index, key in enumerate(label_set.keys()):
        emb = encode(label_set.provision_texts[key], params)
        protos.append(Prototype(index, KIND_PROVISION, emb.vector, key))
    return protos


def prototype_matrix(prototypes: Sequence[Prototype]) -> np.ndarray:
    if not prototypes:
        return np.zeros((0, 0))
    return np.stack([p.vector for p in prototypes])


def prototype_labels(prototypes: Sequence[Prototype]) -> np.ndarray:
    return np.array([p.label_index for p in prototypes], dtype=np.int64)


def write_prototype_dump(prototypes: Sequence[Prototype], path: str | Path) -> None:
    """One JSON record per line, in head-column order."""
    with open(path, "w", encoding="utf-8") as fh:
        for p in prototypes:
            record = {
                "label": p.label_index,
                "kind": p.kind,
                "source": p.source,
                "vector": [float(x) for x in p.vector],
            }
            fh.write(json.dumps(record, separators=(",", ":")) + "\n")


def read_prototype_dump(path: str | Path) -> list[Prototype]:
    protos = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        protos.append(
            Prototype(record["label"], record["kind"], np.array(record["vector"]), record["source"])
        )
    return protos
