"""Interchange formats: binary embedding tables, score CSVs, selection manifests.

Embedding tables use a little-endian binary container (extension ``.nceb``)
because tables can reach 1e5 records x 1e3 floats and bit-exactness matters
for cross-implementation comparison:

    bytes 0-3   magic ``NCEB``
    u32         version (currently 1)
    u32         dimension
    u64         record count
    per record:
        u8      label (0 = real, 1 = fake)
        u16     algorithm_id (0 = bonafide/none, >=1 = spoofing algorithm)
        u32     id_len
        bytes   id_len bytes of UTF-8 sample_id
        f32[d]  embedding, d = header dimension

Scores and manifests are small and human-inspectable, so they stay CSV.
Labels on disk are the lowercase tokens ``real``/``fake``; anything else is
rejected, never coerced.
"""

from __future__ import annotations

import csv
import enum
import io
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from nc_coreset.errors import (
    BadMagic,
    DimensionMismatch,
    DuplicateSampleId,
    InvariantViolation,
    IoFailure,
    MalformedRow,
    NonFiniteValue,
    TruncatedFile,
    UnknownLabelToken,
    VersionMismatch,
)

MAGIC = b"NCEB"
VERSION = 1

_HEADER = struct.Struct("<4sIIQ")
_REC_PREFIX = struct.Struct("<BHI")


class Label(enum.IntEnum):
    REAL = 0
    FAKE = 1

    @property
    def token(self) -> str:
        return "real" if self is Label.REAL else "fake"

    @classmethod
    def from_token(cls, token: str) -> "Label":
        if token == "real":
            return cls.REAL
        if token == "fake":
            return cls.FAKE
        raise UnknownLabelToken(f"unknown label token {token!r}")


class Rule(enum.Enum):
    """Selection provenance recorded per manifest row."""

    THRESHOLD = "Threshold"
    TOP_FRACTION = "TopFraction"
    TOP_COUNT = "TopCount"
    RANDOM = "Random"
    CLUSTER_THRESHOLD = "ClusterThreshold"

    @classmethod
    def from_token(cls, token: str) -> "Rule":
        for rule in cls:
            if rule.value == token:
                return rule
        raise MalformedRow(f"unknown rule token {token!r}")


@dataclass(frozen=True)
class EmbeddingRecord:
    sample_id: str
    label: Label
    algorithm_id: int
    embedding: np.ndarray  # float32, read-only

    def __post_init__(self) -> None:
        # private copy: freezing a caller-owned buffer would alias their flags
        emb = np.array(self.embedding, dtype=np.float32)
        emb.flags.writeable = False
        object.__setattr__(self, "embedding", emb)
        object.__setattr__(self, "label", Label(self.label))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingRecord):
            return NotImplemented
        return (
            self.sample_id == other.sample_id
            and self.label == other.label
            and self.algorithm_id == other.algorithm_id
            and self.embedding.tobytes() == other.embedding.tobytes()
        )

    def validate(self, dimension: int) -> None:
        if self.embedding.ndim != 1 or self.embedding.shape[0] != dimension:
            raise DimensionMismatch(
                f"record {self.sample_id!r}: embedding length "
                f"{self.embedding.shape} != table dimension {dimension}"
            )
        if not np.all(np.isfinite(self.embedding)):
            raise NonFiniteValue(f"record {self.sample_id!r}: non-finite embedding value")
        if not 0 <= self.algorithm_id <= 0xFFFF:
            raise InvariantViolation(
                f"record {self.sample_id!r}: algorithm_id {self.algorithm_id} outside u16"
            )
        if self.label is Label.REAL and self.algorithm_id != 0:
            raise InvariantViolation(
                f"record {self.sample_id!r}: real label with algorithm_id "
                f"{self.algorithm_id}"
            )


@dataclass(frozen=True)
class EmbeddingTable:
    dimension: int
    records: tuple[EmbeddingRecord, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))

    def __len__(self) -> int:
        return len(self.records)

    def validate(self) -> None:
        if self.dimension < 1:
            raise InvariantViolation(f"dimension must be >= 1, got {self.dimension}")
        seen: set[str] = set()
        for rec in self.records:
            rec.validate(self.dimension)
            if rec.sample_id in seen:
                raise DuplicateSampleId(f"duplicate sample_id {rec.sample_id!r}")
            seen.add(rec.sample_id)

    def by_label(self, label: Label) -> tuple[EmbeddingRecord, ...]:
        return tuple(r for r in self.records if r.label is label)

    def count(self, label: Label) -> int:
        return sum(1 for r in self.records if r.label is label)

    def matrix(self, label: Label | None = None) -> np.ndarray:
        """Embeddings stacked as a float64 (n, dimension) matrix, record order."""
        recs = self.records if label is None else self.by_label(label)
        if not recs:
            return np.zeros((0, self.dimension), dtype=np.float64)
        return np.stack([r.embedding for r in recs]).astype(np.float64)


@dataclass(frozen=True)
class ScoreRow:
    sample_id: str
    label: Label
    score: float


@dataclass(frozen=True)
class ScoreTable:
    rows: tuple[ScoreRow, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", tuple(self.rows))

    def __len__(self) -> int:
        return len(self.rows)

    def validate(self) -> None:
        seen: set[str] = set()
        for row in self.rows:
            if not np.isfinite(row.score):
                raise NonFiniteValue(f"score for {row.sample_id!r} is not finite")
            if row.sample_id in seen:
                raise DuplicateSampleId(f"duplicate sample_id {row.sample_id!r}")
            seen.add(row.sample_id)

    def as_dict(self) -> dict[str, ScoreRow]:
        return {row.sample_id: row for row in self.rows}


@dataclass(frozen=True)
class ManifestRow:
    sample_id: str
    label: Label
    cluster_id: int  # -1 when no cluster applies
    distance: float
    rule: Rule


@dataclass(frozen=True)
class SelectionManifest:
    """Ordered record of selected samples.

    Rows are canonicalized at construction: sorted ascending by
    (class label, distance, sample_id), so two manifests holding the same
    selections compare (and serialize) identically.
    """

    rows: tuple[ManifestRow, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        ordered = tuple(
            sorted(self.rows, key=lambda r: (int(r.label), r.distance, r.sample_id))
        )
        object.__setattr__(self, "rows", ordered)

    def __len__(self) -> int:
        return len(self.rows)

    def validate(self) -> None:
        seen: set[str] = set()
        for row in self.rows:
            if row.rule is not Rule.RANDOM and not row.distance >= 0.0:
                raise InvariantViolation(
                    f"row {row.sample_id!r}: negative distance under rule {row.rule.value}"
                )
            if not np.isfinite(row.distance):
                raise NonFiniteValue(f"row {row.sample_id!r}: non-finite distance")
            if row.sample_id in seen:
                raise DuplicateSampleId(f"duplicate sample_id {row.sample_id!r}")
            seen.add(row.sample_id)

    def sample_ids(self) -> tuple[str, ...]:
        return tuple(r.sample_id for r in self.rows)


# --- binary table I/O --------------------------------------------------------


def store_table(table: EmbeddingTable, path: str | Path) -> None:
    """Write ``table`` to ``path``; byte-deterministic for a given table value."""
    table.validate()
    parts: list[bytes] = [_HEADER.pack(MAGIC, VERSION, table.dimension, len(table.records))]
    for rec in table.records:
        sid = rec.sample_id.encode("utf-8")
        parts.append(_REC_PREFIX.pack(int(rec.label), rec.algorithm_id, len(sid)))
        parts.append(sid)
        parts.append(rec.embedding.astype("<f4", copy=False).tobytes())
    try:
        Path(path).write_bytes(b"".join(parts))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_table(path: str | Path) -> EmbeddingTable:
    """Read an ``.nceb`` file, verifying every header and record invariant.

    Truncation inside a record's f32 block is reported as DimensionMismatch
    (the vector disagrees with the header dimension); truncation anywhere
    else, and trailing bytes past the declared record count, are
    TruncatedFile.
    """
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    if len(blob) < _HEADER.size:
        if blob[: len(MAGIC)] != MAGIC[: len(blob)] or not blob:
            raise BadMagic(f"{path}: not an NCEB file")
        raise TruncatedFile(f"{path}: incomplete header")
    magic, version, dimension, count = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise VersionMismatch(f"{path}: version {version}, expected {VERSION}")
    if dimension < 1:
        raise InvariantViolation(f"{path}: header dimension {dimension} < 1")

    offset = _HEADER.size
    records: list[EmbeddingRecord] = []
    seen: set[str] = set()
    vec_bytes = 4 * dimension
    for i in range(count):
        if offset + _REC_PREFIX.size > len(blob):
            raise TruncatedFile(f"{path}: record {i} cut off in prefix")
        label_byte, algorithm_id, id_len = _REC_PREFIX.unpack_from(blob, offset)
        offset += _REC_PREFIX.size
        if label_byte not in (0, 1):
            raise InvariantViolation(f"{path}: record {i} label byte {label_byte}")
        if offset + id_len > len(blob):
            raise TruncatedFile(f"{path}: record {i} cut off in sample_id")
        try:
            sample_id = blob[offset : offset + id_len].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InvariantViolation(f"{path}: record {i} sample_id not UTF-8") from exc
        offset += id_len
        if offset + vec_bytes > len(blob):
            raise DimensionMismatch(
                f"{path}: record {i} ({sample_id!r}) holds "
                f"{(len(blob) - offset) // 4} floats, header dimension is {dimension}"
            )
        emb = np.frombuffer(blob, dtype="<f4", count=dimension, offset=offset).copy()
        offset += vec_bytes
        if not np.all(np.isfinite(emb)):
            raise NonFiniteValue(f"{path}: record {i} ({sample_id!r}) non-finite value")
        if sample_id in seen:
            raise DuplicateSampleId(f"{path}: duplicate sample_id {sample_id!r}")
        seen.add(sample_id)
        label = Label(label_byte)
        if label is Label.REAL and algorithm_id != 0:
            raise InvariantViolation(
                f"{path}: record {i} ({sample_id!r}) real with algorithm_id {algorithm_id}"
            )
        records.append(EmbeddingRecord(sample_id, label, algorithm_id, emb))

    if offset != len(blob):
        raise TruncatedFile(f"{path}: {len(blob) - offset} trailing bytes past declared records")
    return EmbeddingTable(dimension=dimension, records=tuple(records))


# --- CSV I/O ------------------------------------------------------------------

SCORE_HEADER = ["sample_id", "label", "score"]
MANIFEST_HEADER = ["sample_id", "label", "cluster_id", "distance", "rule"]


def _read_csv_rows(path: str | Path, header: Sequence[str]) -> list[list[str]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(text.splitlines())
    rows = list(reader)
    if not rows or rows[0] != list(header):
        raise MalformedRow(f"{path}: expected header {','.join(header)!r}")
    return rows[1:]


def read_score_table(path: str | Path) -> ScoreTable:
    rows: list[ScoreRow] = []
    for lineno, cells in enumerate(_read_csv_rows(path, SCORE_HEADER), start=2):
        if len(cells) != 3:
            raise MalformedRow(f"{path}:{lineno}: expected 3 columns, got {len(cells)}")
        sample_id, label_token, score_text = cells
        label = Label.from_token(label_token)
        try:
            score = float(score_text)
        except ValueError as exc:
            raise MalformedRow(f"{path}:{lineno}: unparsable score {score_text!r}") from exc
        if not np.isfinite(score):
            raise NonFiniteValue(f"{path}:{lineno}: non-finite score")
        rows.append(ScoreRow(sample_id, label, score))
    table = ScoreTable(tuple(rows))
    table.validate()
    return table


def _write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    _write_text(path, buf.getvalue())


def write_score_table(table: ScoreTable, path: str | Path) -> None:
    table.validate()
    _write_csv(
        path, SCORE_HEADER, ((r.sample_id, r.label.token, repr(float(r.score))) for r in table.rows)
    )


def write_manifest(manifest: SelectionManifest, path: str | Path) -> None:
    """Emit manifest CSV; rows come out sorted by (class label, distance)."""
    manifest.validate()
    _write_csv(
        path,
        MANIFEST_HEADER,
        (
            (r.sample_id, r.label.token, str(int(r.cluster_id)), repr(float(r.distance)), r.rule.value)
            for r in manifest.rows
        ),
    )


def read_manifest(path: str | Path) -> SelectionManifest:
    rows: list[ManifestRow] = []
    for lineno, cells in enumerate(_read_csv_rows(path, MANIFEST_HEADER), start=2):
        if len(cells) != 5:
            raise MalformedRow(f"{path}:{lineno}: expected 5 columns, got {len(cells)}")
        sample_id, label_token, cluster_text, distance_text, rule_token = cells
        label = Label.from_token(label_token)
        try:
            cluster_id = int(cluster_text)
            distance = float(distance_text)
        except ValueError as exc:
            raise MalformedRow(f"{path}:{lineno}: unparsable field") from exc
        rows.append(ManifestRow(sample_id, label, cluster_id, distance, Rule.from_token(rule_token)))
    manifest = SelectionManifest(tuple(rows))
    manifest.validate()
    return manifest


def _write_text(path: str | Path, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8", newline="")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
