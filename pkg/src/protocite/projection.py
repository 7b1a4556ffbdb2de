"""2D projection of the embedding space via power-iteration PCA."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .prototypes import KIND_PRECEDENT, Prototype


@dataclass
class ProjectedPoint:
    x: float
    y: float
    kind: str  # sample | precedent-prototype | provision-prototype
    label: int  # -1 for unlabeled samples
    id: str


@dataclass
class Projection:
    points: list[ProjectedPoint]
    components: np.ndarray  # (2, d)
    mean: np.ndarray
    explained_variance: tuple[float, float]
    degenerate: bool  # second axis zeroed for rank-deficient input

    def to_csv(self) -> str:
        lines = ["x,y,kind,label,id"]
        for p in self.points:
            lines.append(f"{p.x:.10g},{p.y:.10g},{p.kind},{p.label},{p.id}")
        return "\n".join(lines) + "\n"


def project_2d(
    embeddings: np.ndarray,
    prototypes: Sequence[Prototype] = (),
    sample_labels: Sequence[int] | None = None,
    sample_ids: Sequence[str] | None = None,
    seed: int = 0,
) -> Projection:
    """Mean-centered top-2 principal components of samples plus prototypes.

    Components come from iterated power method with deflation; signs are
    normalized so each component's largest-magnitude entry is positive.
    Rank-deficient inputs zero the second axis and set ``degenerate``.
    """
    embeddings = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    proto_vectors = [p.vector for p in prototypes]
    stacked = np.vstack([embeddings] + [v[None, :] for v in proto_vectors]) if proto_vectors else embeddings
    if len(stacked) < 3:
        raise ValueError(f"projection needs at least 3 points, got {len(stacked)}")

    mean = stacked.mean(axis=0)
    centered = stacked - mean
    cov = centered.T @ centered
    rng = np.random.default_rng(seed)

    v1, lam1 = _power_iteration(cov, rng)
    cov2 = cov - lam1 * np.outer(v1, v1)
    v2, lam2 = _power_iteration(cov2, rng)
    degenerate = lam2 <= 1e-12 * max(lam1, 1.0)
    if degenerate:
        v2 = np.zeros_like(v2)
        lam2 = 0.0
    components = np.stack([_fix_sign(v1), _fix_sign(v2)])
    coords = centered @ components.T

    points = []
    n_samples = len(embeddings)
    for i in range(n_samples):
        label = int(sample_labels[i]) if sample_labels is not None else -1
        pid = str(sample_ids[i]) if sample_ids is not None else str(i)
        points.append(ProjectedPoint(coords[i, 0], coords[i, 1], "sample", label, pid))
    for j, proto in enumerate(prototypes):
        kind = "precedent-prototype" if proto.kind == KIND_PRECEDENT else "provision-prototype"
        row = n_samples + j
        points.append(ProjectedPoint(coords[row, 0], coords[row, 1], kind, proto.label_index, proto.source))
    return Projection(points, components, mean, (float(lam1), float(lam2)), degenerate)


def _power_iteration(matrix: np.ndarray, rng: np.random.Generator, max_iter: int = 2000, tol: float = 1e-13):
    d = matrix.shape[0]
    v = rng.normal(size=d)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = matrix @ v
        norm = np.linalg.norm(w)
        if norm <= 1e-300:
            return v, 0.0
        w /= norm
        if np.linalg.norm(w - v) < tol or np.linalg.norm(w + v) < tol:
            v = w
            break
        v = w
    lam = float(v @ matrix @ v)
    return v, max(lam, 0.0)


def _fix_sign(v: np.ndarray) -> np.ndarray:
    if not np.any(v):
        return v
    pivot = int(np.argmax(np.abs(v)))
    return v if v[pivot] > 0 else -v
