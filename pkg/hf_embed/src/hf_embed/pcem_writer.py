"""Writer for the PCEM v1 embedding interchange format.

Little-endian layout: magic "PCEM", u32 version = 1, u32 dim, u64
count; per record a u32 id byte-length, UTF-8 id bytes, dim float32
values. This mirrors the consuming engine's documented format; the
engine's reader is the conformance oracle in the tests.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterable

import numpy as np

MAGIC = b"PCEM"
VERSION = 1
_HEADER = struct.Struct("<4sIIQ")
_IDLEN = struct.Struct("<I")


def write_pcem(records: Iterable[tuple[str, np.ndarray]], path: str | Path, dim: int) -> int:
    """Stream records to path; returns the record count written."""
    records = list(records)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, dim, len(records)))
        for rec_id, vec in records:
            data = np.ascontiguousarray(vec, dtype="<f4")
            if data.shape != (dim,):
                raise ValueError(f"record {rec_id!r} has shape {data.shape}, expected ({dim},)")
            id_bytes = rec_id.encode("utf-8")
            fh.write(_IDLEN.pack(len(id_bytes)))
            fh.write(id_bytes)
            fh.write(data.tobytes())
    return len(records)
