"""PCEM v1: the binary embedding interchange format.

Little-endian layout: magic bytes "PCEM", u32 version (= 1), u32 dim,
u64 count; then per record a u32 id byte-length, the UTF-8 id bytes,
and dim float32 values. Round-trips are bit-exact.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Sequence

import numpy as np

MAGIC = b"PCEM"
VERSION = 1
_HEADER = struct.Struct("<4sIIQ")
_IDLEN = struct.Struct("<I")


class PcemError(Exception):
    """Base error for embedding-file problems."""


class BadMagicError(PcemError):
    pass


class VersionMismatchError(PcemError):
    pass


class TruncatedFileError(PcemError):
    pass


class DimensionMismatchError(PcemError):
    pass


def write_embedding_file(records: Sequence[tuple[str, np.ndarray]], path: str | Path) -> None:
    """Write (id, vector) records; all vectors must share one dimension.

    Vectors may be raw arrays or objects with a ``vector`` attribute.
    """
    records = [(rec_id, getattr(vec, "vector", vec)) for rec_id, vec in records]
    dims = {int(np.asarray(vec).shape[-1]) for _, vec in records} or {0}
    if len(dims) > 1:
        raise DimensionMismatchError(f"mixed vector dimensions: {sorted(dims)}")
    dim = dims.pop()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, dim, len(records)))
        for rec_id, vec in records:
            data = np.ascontiguousarray(vec, dtype="<f4")
            if data.ndim != 1:
                raise DimensionMismatchError(f"record {rec_id!r} is not a vector")
            id_bytes = rec_id.encode("utf-8")
            fh.write(_IDLEN.pack(len(id_bytes)))
            fh.write(id_bytes)
            fh.write(data.tobytes())


def read_embedding_file(path: str | Path, expected_dim: int | None = None) -> list[tuple[str, np.ndarray]]:
    """Read records back; rejects corrupt headers and short files."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise TruncatedFileError(f"{path}: shorter than the header")
    magic, version, dim, count = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise VersionMismatchError(f"{path}: version {version}, expected {VERSION}")
    if expected_dim is not None and dim != expected_dim:
        raise DimensionMismatchError(f"{path}: dim {dim}, expected {expected_dim}")
    records = []
    offset = _HEADER.size
    vec_bytes = 4 * dim
    for _ in range(count):
        if offset + _IDLEN.size > len(raw):
            raise TruncatedFileError(f"{path}: truncated at record {len(records)}")
        (id_len,) = _IDLEN.unpack_from(raw, offset)
        offset += _IDLEN.size
        if offset + id_len + vec_bytes > len(raw):
            raise TruncatedFileError(f"{path}: truncated at record {len(records)}")
        rec_id = raw[offset : offset + id_len].decode("utf-8")
        offset += id_len
        vec = np.frombuffer(raw, dtype="<f4", count=dim, offset=offset).copy()
        offset += vec_bytes
        records.append((rec_id, vec))
    if offset != len(raw):
        raise PcemError(f"{path}: {len(raw) - offset} trailing bytes after {count} records")
    return records


def read_embedding_map(path: str | Path, expected_dim: int | None = None) -> dict[str, np.ndarray]:
    """Records keyed by id, as float64 (duplicate ids keep the last)."""
    return {rec_id: vec.astype(np.float64) for rec_id, vec in read_embedding_file(path, expected_dim)}
