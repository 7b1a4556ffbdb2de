"""Pure-numpy kernel lane.

Same contracts as the compiled lane in ``_ckernels.pyx``; used as the
fallback when the extension is not built (or when forced via the
PROTOCITE_PURE_KERNELS environment variable).
"""

import numpy as np

LANE = "pure"


def pairwise_sqdist(x, p):
    """Squared euclidean distances between rows of x (B, d) and p (M, d)."""
    x = np.asarray(x, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    diff = x[:, None, :] - p[None, :, :]
    return np.einsum("bmd,bmd->bm", diff, diff)


def similarity_forward(x, p, epsilon):
    """Distance-based similarity scores between rows of x and p.

    Returns (scores, sqdist, dscore_dsqdist). The score of a squared
    distance t is 2*log((t + 1) / (t + epsilon)), which is non-negative
    for epsilon < 1 and strictly decreasing in t.
    """
    d2 = pairwise_sqdist(x, p)
    scores = 2.0 * (np.log(d2 + 1.0) - np.log(d2 + epsilon))
    dscores = 2.0 * (1.0 / (d2 + 1.0) - 1.0 / (d2 + epsilon))
    return scores, d2, dscores


def cosine_assign(x, c):
    """Index of the max-cosine row of c for every row of x.

    Zero rows (on either side) count as cosine 0. Ties resolve to the
    lowest centroid index.
    """
    x = np.asarray(x, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    xn = np.linalg.norm(x, axis=1)
    cn = np.linalg.norm(c, axis=1)
    denom = np.outer(xn, cn)
    with np.errstate(divide="ignore", invalid="ignore"):
        cos = np.where(denom > 0.0, (x @ c.T) / np.where(denom > 0.0, denom, 1.0), 0.0)
    return np.argmax(cos, axis=1).astype(np.int64)
