"""Stable derivation of named sub-seeds from one run seed.

Every random choice in a run flows from a single seed through named
streams (split, shuffle, kmeans, mask, ...), so manifests can record
exactly which stream fed which operation.
"""

from __future__ import annotations

import hashlib


def derive_seed(seed: int, *names: str | int) -> int:
    """A 63-bit sub-seed from (seed, names...); stable across processes."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed)).encode())
    for name in names:
        h.update(b"/")
        h.update(str(name).encode())
    return int.from_bytes(h.digest(), "little") >> 1


def named_seeds(
    seed: int,
    names: tuple[str, ...] = ("split", "shuffle", "kmeans", "mask", "fallback", "encoder"),
) -> dict[str, int]:
    return {name: derive_seed(seed, name) for name in names}
