"""Independent writer/reader for the `.nceb` embedding container.

Little-endian layout: magic ``NCEB``, u32 version (1), u32 dimension,
u64 record count; then per record u8 label (0 real / 1 fake), u16
algorithm_id, u32 id length, the UTF-8 sample id, and dimension float32s.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from nc_export.errors import NcExportError, NonFiniteValue

MAGIC = b"NCEB"
VERSION = 1
_HEADER = struct.Struct("<4sIIQ")
_REC_PREFIX = struct.Struct("<BHI")


@dataclass(frozen=True)
class Record:
    sample_id: str
    label: int  # 0 real, 1 fake
    algorithm_id: int
    embedding: np.ndarray


def write_nceb(path: str | Path, dimension: int, records: list[Record]) -> None:
    """Serialize records; refuses to write anything on a non-finite embedding."""
    chunks = [_HEADER.pack(MAGIC, VERSION, dimension, len(records))]
    for rec in records:
        emb = np.asarray(rec.embedding, dtype="<f4")
        if emb.shape != (dimension,):
            raise NcExportError(
                f"record {rec.sample_id!r}: embedding shape {emb.shape} != ({dimension},)"
            )
        if not np.all(np.isfinite(emb)):
            raise NonFiniteValue(f"record {rec.sample_id!r}: non-finite embedding")
        sid = rec.sample_id.encode("utf-8")
        chunks.append(_REC_PREFIX.pack(rec.label, rec.algorithm_id, len(sid)))
        chunks.append(sid)
        chunks.append(emb.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def read_nceb(path: str | Path) -> tuple[int, list[Record]]:
    """Parse a table back; used to verify our own output."""
    blob = Path(path).read_bytes()
    magic, version, dimension, count = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC or version != VERSION:
        raise NcExportError(f"{path}: unexpected magic/version {magic!r}/{version}")
    offset = _HEADER.size
    records = []
    for _ in range(count):
        label, algorithm_id, id_len = _REC_PREFIX.unpack_from(blob, offset)
        offset += _REC_PREFIX.size
        sample_id = blob[offset : offset + id_len].decode("utf-8")
        offset += id_len
        emb = np.frombuffer(blob, dtype="<f4", count=dimension, offset=offset).copy()
        offset += 4 * dimension
        records.append(Record(sample_id, label, algorithm_id, emb))
    if offset != len(blob):
        raise NcExportError(f"{path}: {len(blob) - offset} unread trailing bytes")
    return dimension, records
